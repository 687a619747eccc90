#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "gmmdiff/error.hpp"

namespace gmmdiff {

/// Discretization δ = t_0 < t_1 < … < t_N = T in forward (noising) time.
struct TimeGrid {
  std::vector<double> points;
  double T = 0.0;
  double delta = 0.0;
  std::string label;  // identity recorded in sample metadata

  std::size_t N() const { return points.empty() ? 0 : points.size() - 1; }
  /// h_k = t_k − t_{k−1}, k = 1..N.
  double step(std::size_t k) const { return points[k] - points[k - 1]; }
  std::vector<double> steps() const {
    std::vector<double> h(N());
    for (std::size_t k = 1; k <= N(); ++k) h[k - 1] = step(k);
    return h;
  }
  /// Sampling-time nodes t'_k = T − t_{N−k}.
  std::vector<double> reverse_times() const {
    std::vector<double> r(points.size());
    for (std::size_t k = 0; k < points.size(); ++k) r[k] = T - points[N() - k];
    return r;
  }
};

namespace detail {
inline std::string fmt_num(double v) {
  std::string s = std::to_string(v);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}
}  // namespace detail

inline TimeGrid uniform_grid(double T, std::size_t N, double delta = 0.0) {
  if (!(T > 0.0) || !std::isfinite(T)) throw Error(Errc::InvalidHorizon, "horizon T must be positive and finite");
  if (N < 1) throw Error(Errc::InvalidStepCount, "step count N must be at least 1");
  if (!(delta >= 0.0) || !(delta < T))
    throw Error(Errc::DeltaExceedsHorizon, "early stop delta must lie in [0, T)");
  TimeGrid g;
  g.T = T;
  g.delta = delta;
  g.points.resize(N + 1);
  const double h = (T - delta) / static_cast<double>(N);
  for (std::size_t k = 0; k < N; ++k) g.points[k] = delta + static_cast<double>(k) * h;
  g.points[N] = T;
  g.label = "uniform(T=" + detail::fmt_num(T) + ",N=" + std::to_string(N) + ",delta=" + detail::fmt_num(delta) + ")";
  return g;
}

/// c = (T + log L)/N, the step scale of the exponential-decay schedule.
inline double exp_decay_scale(double T, std::size_t N, double L) { return (T + std::log(L)) / static_cast<double>(N); }

/// Smallest N with (T + log L)/N ≤ 1/(K d).
inline std::size_t exp_decay_min_steps(double T, double L, int d, double K) {
  return static_cast<std::size_t>(std::ceil((T + std::log(L)) * K * static_cast<double>(d) - 1e-12));
}

/// Steps h_k = c·min{max{t_{k−1}, 1/L}, 1} from t_0 = 0, geometric growth
/// until t reaches 1, then constant c. The recurrence uses the left endpoint.
/// The last step is truncated to land on T; if the leftover would fall under
/// c/L it is spread evenly over the final steps so every h_k stays in [c/L, c].
inline TimeGrid exp_decay_grid(double T, std::size_t N, double L, int d, double K = 1.0) {
  if (!(T > 0.0) || !std::isfinite(T)) throw Error(Errc::InvalidHorizon, "horizon T must be positive and finite");
  if (N < 1) throw Error(Errc::InvalidStepCount, "step count N must be at least 1");
  if (!(L >= 1.0) || !std::isfinite(L)) throw Error(Errc::InvalidArgument, "Lipschitz constant must be >= 1");
  if (d < 1 || !(K > 0.0)) throw Error(Errc::InvalidArgument, "dimension and K must be positive");
  const double c = exp_decay_scale(T, N, L);
  const double budget = 1.0 / (K * static_cast<double>(d));
  if (c > budget) {
    const auto min_n = exp_decay_min_steps(T, L, d, K);
    throw Error(Errc::StepBudgetViolated,
                "c = " + std::to_string(c) + " exceeds 1/(K d) = " + std::to_string(budget) +
                    "; use N >= " + std::to_string(min_n),
                static_cast<std::int64_t>(min_n));
  }
  const double h_min = c / L;
  TimeGrid g;
  g.T = T;
  g.delta = 0.0;
  g.points.push_back(0.0);
  // Constant-rate stretches are anchored so that t_k = t_anchor + j·h exactly;
  // at L = 1 this reproduces uniform_grid point for point.
  double anchor = 0.0;
  std::size_t anchor_k = 0;
  double anchor_h = -1.0;
  const double snap = 1e-9 * h_min;
  while (true) {
    const double t = g.points.back();
    const double h = c * std::min(std::max(t, 1.0 / L), 1.0);
    double next;
    if (h == anchor_h) {
      next = anchor + static_cast<double>(g.points.size() - anchor_k) * h;
    } else {
      anchor = t;
      anchor_k = g.points.size() - 1;
      anchor_h = h;
      next = t + h;
    }
    if (next >= T - snap) break;
    g.points.push_back(next);
  }
  g.points.push_back(T);
  const std::size_t n = g.points.size() - 1;
  // Leftovers within rounding of c/L are kept as they are.
  const double h_floor = h_min * (1.0 - 1e-9);
  if (n >= 2 && g.points[n] - g.points[n - 1] < h_floor) {
    // Merge the leftover into the last m steps, growing m until the common
    // step reaches c/L.
    for (std::size_t m = 1; m < n; ++m) {
      const double start = g.points[n - 1 - m];
      const double avg = (T - start) / static_cast<double>(m + 1);
      if (avg >= h_floor || m + 1 == n) {
        for (std::size_t j = 1; j <= m; ++j) g.points[n - 1 - m + j] = start + static_cast<double>(j) * avg;
        break;
      }
    }
  }
  g.label = "expdecay(T=" + detail::fmt_num(T) + ",N=" + std::to_string(N) + ",L=" + detail::fmt_num(L) +
            ",d=" + std::to_string(d) + ",K=" + detail::fmt_num(K) + ")";
  return g;
}

}  // namespace gmmdiff
