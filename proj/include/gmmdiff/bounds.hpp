#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gmmdiff/forward.hpp"
#include "gmmdiff/gmm.hpp"

namespace gmmdiff {

/// Region constants: β ≤ ‖x − a_tμ_i‖ ≤ R for every component and p_t(x) ≥ γ.
struct ConditionParams {
  double R = 1.0;
  double beta = 0.05;
  double gamma = 0.05;
};

inline void check_params(const ConditionParams& p) {
  if (!(p.R >= 1.0) || !std::isfinite(p.R))
    throw Error(Errc::ParamsOutOfRange, "R must be finite and at least 1, got " + std::to_string(p.R));
  if (!(p.beta > 0.0 && p.beta < 0.1))
    throw Error(Errc::ParamsOutOfRange, "beta must lie in (0, 0.1), got " + std::to_string(p.beta));
  if (!(p.gamma > 0.0 && p.gamma < 0.1))
    throw Error(Errc::ParamsOutOfRange, "gamma must lie in (0, 0.1), got " + std::to_string(p.gamma));
}

/// Eigen-extrema and determinant/mean extrema over all components.
struct SpectralSummary {
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  double det_min = 0.0;
  double log_det_min = 0.0;
  double mu_max = 0.0;  // max_i ‖μ_i‖²
};

inline SpectralSummary spectral_summary(const GmmSpec& spec) {
  SpectralSummary s;
  s.sigma_min = std::numeric_limits<double>::infinity();
  s.sigma_max = 0.0;
  s.log_det_min = std::numeric_limits<double>::infinity();
  for (const auto& c : spec.components()) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(c.covariance(), Eigen::EigenvaluesOnly);
    s.sigma_min = std::min(s.sigma_min, eig.eigenvalues().minCoeff());
    s.sigma_max = std::max(s.sigma_max, eig.eigenvalues().maxCoeff());
    s.log_det_min = std::min(s.log_det_min, c.log_det());
    s.mu_max = std::max(s.mu_max, c.mean().squaredNorm());
  }
  s.det_min = std::exp(s.log_det_min);
  return s;
}

/// Closed-form score Lipschitz constant, carried in log space as well because
/// the (2π)^{-d} factor underflows for large d.
struct LipschitzValue {
  double value = 0.0;
  double log_value = 0.0;
};

namespace detail {
inline double log_add_exp(double a, double b) {
  const double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log1p(std::exp(-std::abs(a - b)));
}
}  // namespace detail

/// L = 1/σ_min + 2R²/(γ²σ_min²) · (1/((2π)^d det_min) + 1/((2π)^{d/2} det_min^{1/2})) · exp(−β²/(2σ_max)).
inline LipschitzValue lipschitz_constant(const SpectralSummary& summary, const ConditionParams& params, int d) {
  check_params(params);
  if (d < 1) throw Error(Errc::DimensionMismatch, "dimension must be positive");
  if (!(summary.sigma_min > 0.0) || !(summary.sigma_max >= summary.sigma_min))
    throw Error(Errc::InvalidArgument, "spectral summary must satisfy 0 < sigma_min <= sigma_max");
  const double dd = static_cast<double>(d);
  const double log_first = -std::log(summary.sigma_min);
  const double log_lead = std::log(2.0) + 2.0 * std::log(params.R) - 2.0 * std::log(params.gamma) -
                          2.0 * std::log(summary.sigma_min);
  const double log_full = -dd * kLog2Pi - summary.log_det_min;
  const double log_half = -0.5 * dd * kLog2Pi - 0.5 * summary.log_det_min;
  const double log_tail = -params.beta * params.beta / (2.0 * summary.sigma_max);
  const double log_second = log_lead + detail::log_add_exp(log_full, log_half) + log_tail;
  const double log_l = detail::log_add_exp(log_first, log_second);
  return {std::exp(log_l), log_l};
}

/// M2 = Σ α_i(‖μ_i‖² + tr Σ_i), m2 = √M2, and the per-component maximum it is bounded by.
struct SecondMoment {
  double m2 = 0.0;
  double M2 = 0.0;
  double max_term = 0.0;
};

inline SecondMoment second_moment(const GmmSpec& spec) {
  SecondMoment out;
  for (const auto& c : spec.components()) {
    const double term = c.mean().squaredNorm() + c.covariance().trace();
    out.M2 += c.weight() * term;
    out.max_term = std::max(out.max_term, term);
  }
  out.m2 = std::sqrt(out.M2);
  return out;
}

/// KL(N(μ1, Σ1) ‖ N(μ2, Σ2)).
inline double kl_gaussian_exact(const Eigen::Ref<const Vector>& mu1, const Eigen::Ref<const Matrix>& cov1,
                                const Eigen::Ref<const Vector>& mu2, const Eigen::Ref<const Matrix>& cov2) {
  const auto d = mu1.size();
  if (mu2.size() != d || cov1.rows() != d || cov1.cols() != d || cov2.rows() != d || cov2.cols() != d)
    throw Error(Errc::DimensionMismatch, "Gaussian parameters do not share a dimension");
  Eigen::LLT<Matrix> l1(cov1);
  Eigen::LLT<Matrix> l2(cov2);
  if (l1.info() != Eigen::Success || l2.info() != Eigen::Success)
    throw Error(Errc::NotPositiveDefinite, "covariance is not positive definite");
  const Matrix L1 = l1.matrixL();
  const Matrix L2 = l2.matrixL();
  double logdet1 = 0.0;
  double logdet2 = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    logdet1 += 2.0 * std::log(L1(i, i));
    logdet2 += 2.0 * std::log(L2(i, i));
  }
  const double trace = l2.solve(cov1).trace();
  const Vector diff = mu1 - mu2;
  const double maha = diff.dot(l2.solve(diff));
  const double kl = 0.5 * (logdet2 - logdet1 + trace + maha - static_cast<double>(d));
  return std::max(kl, 0.0);
}

/// Upper bound on KL(p0 ‖ N(0, I)) plus the tighter convexity bound Σ α_i KL(N_i ‖ N(0, I)).
struct KlPriorBound {
  double upper = 0.0;
  double convexity = 0.0;
};

inline KlPriorBound kl_to_standard_upper(const GmmSpec& spec) {
  const int d = spec.dim();
  const Vector zero = Vector::Zero(d);
  const Matrix eye = Matrix::Identity(d, d);
  KlPriorBound out;
  for (const auto& c : spec.components())
    out.convexity += c.weight() * kl_gaussian_exact(c.mean(), c.covariance(), zero, eye);
  const auto s = spectral_summary(spec);
  const double dd = static_cast<double>(d);
  out.upper = 0.5 * (-s.log_det_min + dd * s.sigma_max + s.mu_max - dd);
  return out;
}

enum class RegionClause { None, TooClose, TooFar, DensityTooLow };

constexpr const char* region_clause_name(RegionClause c) {
  switch (c) {
    case RegionClause::None: return "none";
    case RegionClause::TooClose: return "distance_below_beta";
    case RegionClause::TooFar: return "distance_above_R";
    case RegionClause::DensityTooLow: return "density_below_gamma";
  }
  return "unknown";
}

struct RegionVerdict {
  bool inside = false;
  RegionClause failed = RegionClause::None;
  std::optional<std::size_t> component;
  double value = 0.0;  // the offending distance or density
};

/// Membership test for the condition region of `spec_t`. The component means
/// of a pushed-forward spec already equal a_t·μ_i, so they serve as centers.
inline RegionVerdict region_check(const GmmSpec& spec_t, const Eigen::Ref<const Vector>& x,
                                  const ConditionParams& params) {
  detail::check_dim(spec_t, x.size());
  for (std::size_t i = 0; i < spec_t.size(); ++i) {
    const double dist = (x - spec_t[i].mean()).norm();
    if (dist < params.beta) return {false, RegionClause::TooClose, i, dist};
    if (dist > params.R) return {false, RegionClause::TooFar, i, dist};
  }
  const double p = density(spec_t, x);
  if (p < params.gamma) return {false, RegionClause::DensityTooLow, std::nullopt, p};
  return {true, RegionClause::None, std::nullopt, p};
}

namespace detail {
/// Linear-interpolation percentile, q in [0, 100].
inline double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}
}  // namespace detail

/// Percentile rule for (R, β, γ) from points drawn from `spec_t`.
inline ConditionParams calibrate_region(const GmmSpec& spec_t, const SampleBatch& samples) {
  if (samples.size() < 1000)
    throw Error(Errc::TooFewSamples, "calibration needs at least 1000 samples, got " + std::to_string(samples.size()));
  if (samples.dim() != spec_t.dim()) throw Error(Errc::DimensionMismatch, "sample dimension differs from spec");
  std::vector<double> max_dist(samples.size());
  std::vector<double> min_dist(samples.size());
  std::vector<double> dens(samples.size());
  BlockWorkspace ws;
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const auto x = samples.point(j);
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& c : spec_t.components()) {
      const double dist = (x - c.mean()).norm();
      lo = std::min(lo, dist);
      hi = std::max(hi, dist);
    }
    min_dist[j] = lo;
    max_dist[j] = hi;
  }
  const Eigen::ArrayXd logp = log_density_block(spec_t, samples.points, ws);
  for (std::size_t j = 0; j < samples.size(); ++j) dens[j] = std::exp(logp(static_cast<Eigen::Index>(j)));

  constexpr double kTiny = std::numeric_limits<double>::min();
  ConditionParams p;
  p.R = std::max(1.0, detail::percentile(max_dist, 99.0));
  p.beta = std::max(kTiny, std::min(detail::percentile(min_dist, 1.0), 0.0999));
  p.gamma = std::max(kTiny, std::min(detail::percentile(dens, 1.0), 0.0999));
  return p;
}

/// Bound quantities for the spec at time t.
struct BoundReport {
  double t = 0.0;
  LipschitzValue L;
  SecondMoment moment;
  KlPriorBound kl;
  SpectralSummary summary;
  ConditionParams params;
};

inline BoundReport bound_report(const GmmSpec& spec_t, double t, const ConditionParams& params) {
  BoundReport r;
  r.t = t;
  r.summary = spectral_summary(spec_t);
  r.params = params;
  r.L = lipschitz_constant(r.summary, params, spec_t.dim());
  r.moment = second_moment(spec_t);
  r.kl = kl_to_standard_upper(spec_t);
  return r;
}

}  // namespace gmmdiff
