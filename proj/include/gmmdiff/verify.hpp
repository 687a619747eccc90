#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gmmdiff/bounds.hpp"
#include "gmmdiff/forward.hpp"
#include "gmmdiff/gmm.hpp"
#include "gmmdiff/metrics.hpp"
#include "gmmdiff/random.hpp"
#include "gmmdiff/sweep.hpp"

namespace gmmdiff {

/// One measured quantity compared against a threshold.
struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool upper = true;  // pass iff value <= threshold (else value >= threshold)
  bool pass = false;
};

struct VerifyReport {
  std::string suite;
  std::vector<Check> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
  void add_upper(std::string name, double value, double threshold) {
    checks.push_back({std::move(name), value, threshold, true, value <= threshold});
  }
  void add_lower(std::string name, double value, double threshold) {
    checks.push_back({std::move(name), value, threshold, false, value >= threshold});
  }
};

/// Relative error used by the derivative checks: ‖a − b‖∞ / max(1, ‖b‖∞).
template <class A, class B>
double relative_error(const A& a, const B& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

/// Central finite difference of log_density, step h per coordinate.
inline Vector fd_score(const GmmSpec& spec, const Vector& x, double h = 1e-5) {
  Vector g(x.size());
  Vector xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    xm(i) = x(i) - h;
    g(i) = (log_density(spec, xp) - log_density(spec, xm)) / (2.0 * h);
    xp(i) = xm(i) = x(i);
  }
  return g;
}

/// Central finite difference of the score; column j is ∂score/∂x_j.
inline Matrix fd_jacobian(const GmmSpec& spec, const Vector& x, double h = 1e-5) {
  Matrix J(x.size(), x.size());
  Vector xp = x, xm = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    xp(j) = x(j) + h;
    xm(j) = x(j) - h;
    J.col(j) = (score(spec, xp) - score(spec, xm)) / (2.0 * h);
    xp(j) = xm(j) = x(j);
  }
  return J;
}

/// Score and Jacobian against finite differences at points drawn from `spec`.
inline VerifyReport verify_score(const GmmSpec& spec, std::size_t points, std::uint64_t seed) {
  VerifyReport r;
  r.suite = "score";
  const auto batch = sample(spec, points, seed);
  double grad = 0.0, hess = 0.0, resp = 0.0, asym = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Vector x = batch.point(i);
    grad = std::max(grad, relative_error(score(spec, x), fd_score(spec, x)));
    const Matrix J = score_jacobian(spec, x);
    hess = std::max(hess, relative_error(J, fd_jacobian(spec, x)));
    asym = std::max(asym, (J - J.transpose()).cwiseAbs().maxCoeff());
    resp = std::max(resp, std::abs(responsibilities(spec, x).values.sum() - 1.0));
  }
  r.add_upper("score_vs_finite_difference", grad, 1e-5);
  r.add_upper("jacobian_vs_finite_difference", hess, 1e-4);
  r.add_upper("jacobian_asymmetry", asym, 1e-12);
  r.add_upper("responsibility_sum_error", resp, 1e-12);
  return r;
}

/// Result of probing the Jacobian norm until enough region points were seen.
struct RegionProbe {
  ConditionParams params;
  SpectralProbe probe;
  std::size_t drawn = 0;
};

/// Calibrates (R, β, γ) on `calibration` fresh draws from spec_t unless
/// `params` is given, then draws candidates until `target` of them pass
/// region_check (at most 50 rounds) and records the largest Jacobian norm.
inline RegionProbe probe_region(const GmmSpec& spec_t, std::optional<ConditionParams> params, std::size_t target,
                                std::size_t calibration, std::uint64_t seed) {
  RegionProbe out;
  out.params = params ? *params : calibrate_region(spec_t, sample(spec_t, calibration, substream_seed(seed, stream::kCalibration, 0)));
  check_params(out.params);
  bool any = false;
  for (std::uint64_t round = 0; round < 50 && out.probe.pass_count < target; ++round) {
    const auto batch = sample(spec_t, target, substream_seed(seed, stream::kCalibration, round + 1));
    out.drawn += batch.size();
    for (std::size_t i = 0; i < batch.size() && out.probe.pass_count < target; ++i) {
      const auto x = batch.point(i);
      if (!region_check(spec_t, x, out.params).inside) continue;
      ++out.probe.pass_count;
      const double norm = spectral_norm(score_jacobian(spec_t, x));
      if (!any || norm > out.probe.max_norm) {
        out.probe.max_norm = norm;
        out.probe.argmax = x;
        any = true;
      }
    }
  }
  if (!any) throw Error(Errc::NoPointsInRegion, "no sampled point lies in the condition region");
  return out;
}

inline std::string time_tag(double t) { return "t=" + detail::fmt_num(t); }

/// Max Jacobian norm over region points vs the closed-form L, per time.
inline VerifyReport verify_lipschitz(const GmmSpec& spec0, const std::vector<double>& times,
                                     std::optional<ConditionParams> params, std::size_t points, std::uint64_t seed) {
  VerifyReport r;
  r.suite = "lipschitz";
  for (std::size_t i = 0; i < times.size(); ++i) {
    const GmmSpec spec_t = marginal_at(spec0, times[i]);
    const auto probe = probe_region(spec_t, params, points, std::max<std::size_t>(points, 1000),
                                    substream_seed(seed, stream::kMonteCarlo, i));
    const auto L = lipschitz_constant(spectral_summary(spec_t), probe.params, spec_t.dim());
    r.add_upper(time_tag(times[i]) + ":max_jacobian_norm", probe.probe.max_norm, L.value);
    r.add_lower(time_tag(times[i]) + ":region_points", static_cast<double>(probe.probe.pass_count),
                static_cast<double>(points));
  }
  return r;
}

/// Forward Monte Carlo a_t x₀ + b_t z against marginal_at(spec0, t).
inline SampleBatch forward_mc(const GmmSpec& spec0, double t, std::size_t n, std::uint64_t seed) {
  const auto ou = ou_coefficients(t);
  SampleBatch out = sample(spec0, n, seed);
  for_each_block(n, 1, [&](std::size_t block, std::size_t begin, std::size_t end) {
    ChainRng rng(seed, stream::kMonteCarlo, block);
    for (std::size_t i = begin; i < end; ++i) {
      for (int c = 0; c < spec0.dim(); ++c) {
        auto& v = out.points(c, static_cast<Eigen::Index>(i));
        v = ou.a * v + ou.b * rng.normal();
      }
    }
  });
  out.meta.solver = "forward";
  return out;
}

/// Per-axis 1D histogram TV between a batch and the matching marginal of `reference`.
inline double max_marginal_tv(const SampleBatch& batch, const GmmSpec& reference) {
  double worst = 0.0;
  for (int a = 0; a < batch.dim(); ++a) {
    const GmmSpec marg = coordinate_marginal(reference, a);
    SampleBatch axis;
    axis.points = batch.points.row(a);
    worst = std::max(worst, tv_histogram(axis, marg, default_histogram_grid(marg)));
  }
  return worst;
}

inline VerifyReport verify_mixture(const GmmSpec& spec0, const std::vector<double>& times, std::size_t n,
                                   std::uint64_t seed) {
  VerifyReport r;
  r.suite = "mixture";
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    const GmmSpec spec_t = marginal_at(spec0, t);
    double weight_gap = 0.0;
    for (std::size_t c = 0; c < spec0.size(); ++c)
      weight_gap = std::max(weight_gap, std::abs(spec_t[c].weight() - spec0[c].weight()));
    r.add_upper(time_tag(t) + ":component_count_change",
                std::abs(static_cast<double>(spec_t.size()) - static_cast<double>(spec0.size())), 0.0);
    r.add_upper(time_tag(t) + ":weight_change", weight_gap, 0.0);
    const auto mc = forward_mc(spec0, t, n, substream_seed(seed, stream::kMonteCarlo, i));
    r.add_upper(time_tag(t) + ":moment_max_abs_z", moment_diagnostics(mc, spec_t).max_abs_z(), 4.0);
    r.add_upper(time_tag(t) + ":marginal_tv", max_marginal_tv(mc, spec_t), 0.02);
  }
  return r;
}

/// Solver output against p_δ: finite points and per-axis histogram TV.
inline VerifyReport verify_solver_output(const SampleBatch& batch, const GmmSpec& reference, double tv_threshold) {
  VerifyReport r;
  r.suite = "solver";
  r.add_upper("non_finite_points", static_cast<double>((!batch.points.array().isFinite()).count()), 0.0);
  r.add_upper("marginal_tv", max_marginal_tv(batch, reference), tv_threshold);
  return r;
}

}  // namespace gmmdiff
