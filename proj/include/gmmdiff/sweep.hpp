#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "gmmdiff/forward.hpp"
#include "gmmdiff/metrics.hpp"
#include "gmmdiff/random.hpp"
#include "gmmdiff/schedule.hpp"
#include "gmmdiff/score_model.hpp"
#include "gmmdiff/solvers.hpp"

namespace gmmdiff {

enum class SweepAxis { StepCount, Epsilon0 };
enum class GridFamily { Uniform, ExpDecay };
enum class SweepMetric { KlHistogram, TvHistogram };

constexpr const char* axis_name(SweepAxis a) { return a == SweepAxis::StepCount ? "N" : "epsilon0"; }
constexpr const char* family_name(GridFamily f) { return f == GridFamily::Uniform ? "uniform" : "expdecay"; }
constexpr const char* metric_name(SweepMetric m) { return m == SweepMetric::KlHistogram ? "kl_histogram" : "tv_histogram"; }

/// Histogram grid covering every component to ±6 standard deviations.
/// Defaults to 200 bins in 1D, 50 per axis in 2D and 20 per axis in 3D.
inline HistogramGrid default_histogram_grid(const GmmSpec& spec, int bins = 0) {
  const int d = spec.dim();
  if (d > 3) throw Error(Errc::DimensionTooHigh, "histograms support at most 3 dimensions");
  if (bins == 0) bins = d == 1 ? 200 : d == 2 ? 50 : 20;
  HistogramGrid g;
  for (int a = 0; a < d; ++a) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& c : spec.components()) {
      const double sd = std::sqrt(c.covariance()(a, a));
      lo = std::min(lo, c.mean()(a) - 6.0 * sd);
      hi = std::max(hi, c.mean()(a) + 6.0 * sd);
    }
    g.lo.push_back(lo);
    g.hi.push_back(hi);
    g.bins.push_back(bins);
  }
  return g;
}

struct SweepConfig {
  SweepAxis axis = SweepAxis::StepCount;
  std::vector<double> values;
  Scheme scheme = Scheme::ExponentialIntegrator;
  GridFamily family = GridFamily::Uniform;
  double T = 8.0;
  std::size_t N = 1024;     // fixed step count on the epsilon0 axis
  double delta = 0.0;
  double epsilon0 = 0.0;    // fixed score error on the N axis
  double L = 1.0;           // exp-decay schedule only
  double K = 1.0;
  SweepMetric metric = SweepMetric::KlHistogram;
  std::optional<HistogramGrid> histogram;  // default_histogram_grid when empty
  std::size_t n = 100000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct SweepRow {
  double value = 0.0;  // N or epsilon0
  std::string metric;
  double metric_value = 0.0;
  double se = 0.0;
  std::size_t clamped = 0;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::StepCount;
  std::vector<SweepRow> rows;
  std::optional<SlopeFit> fit;   // log-log fit, present with at least 4 rows
  std::vector<double> ratios;    // metric_value[i+1] / metric_value[i]
};

/// Seed of sweep configuration `index`.
inline std::uint64_t sweep_seed(std::uint64_t seed, std::size_t index) {
  return substream_seed(seed, stream::kSweep, index);
}

/// Runs the sampler once per sweep value and scores it against p_δ. The score
/// model's perturbation field is shared by every configuration; the sampler
/// seed is derived per configuration.
inline SweepResult convergence_sweep(const GmmSpec& spec0, const SweepConfig& cfg) {
  const std::size_t min_points = cfg.axis == SweepAxis::StepCount ? 4 : 3;
  if (cfg.values.size() < min_points)
    throw Error(Errc::InvalidArgument, std::string("a sweep over ") + axis_name(cfg.axis) + " needs at least " +
                                           std::to_string(min_points) + " values");
  // The exp-decay schedule always starts at t = 0.
  const double delta = cfg.family == GridFamily::Uniform ? cfg.delta : 0.0;
  const GmmSpec reference = marginal_at(spec0, delta);
  const HistogramGrid hist = cfg.histogram ? *cfg.histogram : default_histogram_grid(reference);
  hist.validate();

  SweepResult result;
  result.axis = cfg.axis;
  for (std::size_t i = 0; i < cfg.values.size(); ++i) {
    const double v = cfg.values[i];
    std::size_t N = cfg.N;
    double eps = cfg.epsilon0;
    if (cfg.axis == SweepAxis::StepCount) {
      if (!(v >= 1.0) || v != std::floor(v)) throw Error(Errc::InvalidStepCount, "sweep step counts must be positive integers");
      N = static_cast<std::size_t>(v);
    } else {
      eps = v;
    }
    const auto kind = eps > 0.0 ? ScoreKind::Perturbed : ScoreKind::Exact;
    const ScoreModel model = make_score_model(spec0, kind, eps, cfg.seed, cfg.T);
    const TimeGrid grid = cfg.family == GridFamily::Uniform ? uniform_grid(cfg.T, N, delta)
                                                            : exp_decay_grid(cfg.T, N, cfg.L, spec0.dim(), cfg.K);
    const SampleBatch batch = run_sampler(model, grid, cfg.scheme, cfg.n, sweep_seed(cfg.seed, i), {cfg.threads});
    SweepRow row;
    row.value = v;
    row.metric = metric_name(cfg.metric);
    if (cfg.metric == SweepMetric::KlHistogram) {
      const auto kl = kl_histogram(batch, reference, hist);
      row.metric_value = kl.value;
      row.se = kl.se;
      row.clamped = kl.clamped;
    } else {
      row.metric_value = tv_histogram(batch, reference, hist);
      // No closed-form standard error; report the TV that binomial cell noise
      // alone produces, ½ Σ √(2 p̂ (1 − p̂) / (π n)).
      double noise = 0.0;
      for (double m : detail::empirical_masses(batch, hist))
        noise += std::sqrt(2.0 * m * (1.0 - m) / (std::numbers::pi * static_cast<double>(cfg.n)));
      row.se = 0.5 * noise;
    }
    result.rows.push_back(row);
  }
  for (std::size_t i = 1; i < result.rows.size(); ++i)
    result.ratios.push_back(result.rows[i].metric_value / result.rows[i - 1].metric_value);
  if (result.rows.size() >= 4) {
    std::vector<double> x, y;
    for (const auto& r : result.rows) {
      x.push_back(r.value);
      y.push_back(r.metric_value);
    }
    const bool positive = std::all_of(x.begin(), x.end(), [](double a) { return a > 0.0; }) &&
                          std::all_of(y.begin(), y.end(), [](double a) { return a > 0.0; });
    if (positive) result.fit = fit_loglog_slope(x, y);
  }
  return result;
}

}  // namespace gmmdiff
