#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gmmdiff/error.hpp"
#include "gmmdiff/random.hpp"
#include "gmmdiff/sample_batch.hpp"

namespace gmmdiff {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

/// Mixture parameters as read from a file or built by hand, before validation.
struct RawComponent {
  double weight = 0.0;
  Vector mean;
  Matrix cov;
};

struct RawMixture {
  std::optional<int> dim;  // taken from the first mean when absent
  std::vector<RawComponent> components;
};

/// One validated Gaussian component with its cached factorizations.
class GaussianComponent {
 public:
  double weight() const { return weight_; }
  double log_weight() const { return log_weight_; }
  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return cov_; }
  /// Lower-triangular L with L Lᵀ = covariance.
  const Matrix& cholesky() const { return chol_; }
  const Matrix& precision() const { return precision_; }
  double log_det() const { return log_det_; }
  /// log weight − ½ log det Σ − (d/2) log 2π.
  double log_normalizer() const { return log_norm_; }

 private:
  friend GaussianComponent make_component(double weight, Vector mean, Matrix cov, std::size_t index);

  double weight_ = 0.0;
  double log_weight_ = 0.0;
  Vector mean_;
  Matrix cov_;
  Matrix chol_;
  Matrix precision_;
  double log_det_ = 0.0;
  double log_norm_ = 0.0;
};

/// A validated k-component Gaussian mixture in dimension d. Immutable.
class GmmSpec {
 public:
  int dim() const { return dim_; }
  std::size_t size() const { return components_.size(); }
  const std::vector<GaussianComponent>& components() const { return components_; }
  const GaussianComponent& operator[](std::size_t i) const { return components_[i]; }

 private:
  friend GmmSpec validate_spec(const RawMixture& raw);
  int dim_ = 0;
  std::vector<GaussianComponent> components_;
};

inline GaussianComponent make_component(double weight, Vector mean, Matrix cov, std::size_t index) {
  const auto d = mean.size();
  const auto idx = static_cast<std::int64_t>(index);
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) {
      if (!std::isfinite(cov(r, c)))
        throw Error(Errc::NotPositiveDefinite,
                    "component " + std::to_string(index) + ": covariance has a non-finite entry", idx);
      if (c > r && std::abs(cov(r, c) - cov(c, r)) > 1e-10)
        throw Error(Errc::NonSymmetricCovariance,
                    "component " + std::to_string(index) + ": covariance entries (" + std::to_string(r) + "," +
                        std::to_string(c) + ") and (" + std::to_string(c) + "," + std::to_string(r) +
                        ") differ by more than 1e-10",
                    idx);
    }
  }
  for (Eigen::Index i = 0; i < d; ++i)
    if (!std::isfinite(mean(i)))
      throw Error(Errc::InvalidArgument, "component " + std::to_string(index) + ": mean has a non-finite entry",
                  idx);
  cov = 0.5 * (cov + cov.transpose()).eval();

  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success)
    throw Error(Errc::NotPositiveDefinite,
                "component " + std::to_string(index) + ": covariance is not positive definite", idx);
  Matrix chol = llt.matrixL();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(chol(i, i) > 0.0) || !std::isfinite(chol(i, i)))
      throw Error(Errc::NotPositiveDefinite,
                  "component " + std::to_string(index) + ": covariance is not positive definite", idx);
    log_det += 2.0 * std::log(chol(i, i));
  }
  Matrix precision = llt.solve(Matrix::Identity(d, d));
  precision = 0.5 * (precision + precision.transpose()).eval();

  GaussianComponent g;
  g.weight_ = weight;
  g.log_weight_ = std::log(weight);
  g.mean_ = std::move(mean);
  g.cov_ = std::move(cov);
  g.chol_ = std::move(chol);
  g.precision_ = std::move(precision);
  g.log_det_ = log_det;
  g.log_norm_ = g.log_weight_ - 0.5 * log_det - 0.5 * static_cast<double>(d) * kLog2Pi;
  return g;
}

/// Checks raw mixture parameters and returns a normalized spec with caches.
/// Weights within 1e-10 of summing to one are rescaled to sum to one and
/// covariances within 1e-10 of symmetric are symmetrized.
inline GmmSpec validate_spec(const RawMixture& raw) {
  if (raw.components.empty()) throw Error(Errc::EmptyMixture, "mixture has no components");
  const int d = raw.dim.value_or(static_cast<int>(raw.components.front().mean.size()));
  if (d < 1) throw Error(Errc::DimensionMismatch, "dimension must be a positive integer");

  double total = 0.0;
  for (std::size_t i = 0; i < raw.components.size(); ++i) {
    const auto& c = raw.components[i];
    const auto idx = static_cast<std::int64_t>(i);
    if (c.mean.size() != d)
      throw Error(Errc::DimensionMismatch,
                  "component " + std::to_string(i) + ": mean has length " + std::to_string(c.mean.size()) +
                      ", expected " + std::to_string(d),
                  idx);
    if (c.cov.rows() != d || c.cov.cols() != d)
      throw Error(Errc::DimensionMismatch,
                  "component " + std::to_string(i) + ": covariance is " + std::to_string(c.cov.rows()) + "x" +
                      std::to_string(c.cov.cols()) + ", expected " + std::to_string(d) + "x" + std::to_string(d),
                  idx);
    if (!std::isfinite(c.weight) || c.weight <= 0.0 || c.weight > 1.0 + 1e-10)
      throw Error(Errc::InvalidWeight, "component " + std::to_string(i) + ": weight must lie in (0, 1]", idx);
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-10)
    throw Error(Errc::WeightsDoNotSumToOne, "weights sum to " + std::to_string(total));

  GmmSpec spec;
  spec.dim_ = d;
  spec.components_.reserve(raw.components.size());
  for (std::size_t i = 0; i < raw.components.size(); ++i) {
    const auto& c = raw.components[i];
    spec.components_.push_back(make_component(c.weight / total, c.mean, c.cov, i));
  }
  return spec;
}

/// Inverse of validate_spec, handy for transforms that rebuild a mixture.
inline RawMixture to_raw(const GmmSpec& spec) {
  RawMixture raw;
  raw.dim = spec.dim();
  for (const auto& c : spec.components()) raw.components.push_back({c.weight(), c.mean(), c.covariance()});
  return raw;
}

/// Single standard normal N(0, I_d).
inline GmmSpec standard_normal(int d) {
  return validate_spec({d, {{1.0, Vector::Zero(d), Matrix::Identity(d, d)}}});
}

namespace detail {

inline void check_dim(const GmmSpec& spec, Eigen::Index n) {
  if (n != spec.dim())
    throw Error(Errc::DimensionMismatch,
                "point has length " + std::to_string(n) + ", spec dimension is " + std::to_string(spec.dim()));
}

/// Per-component log(α_i N_i(x)) into `out`, and g_i = −Σ_i⁻¹(x − μ_i) as columns of `grads`.
inline void component_terms(const GmmSpec& spec, const Eigen::Ref<const Vector>& x, Vector& out, Matrix* grads) {
  const auto k = static_cast<Eigen::Index>(spec.size());
  out.resize(k);
  if (grads) grads->resize(spec.dim(), k);
  Vector diff(spec.dim());
  Vector pd(spec.dim());
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& c = spec[static_cast<std::size_t>(i)];
    diff = x - c.mean();
    pd.noalias() = c.precision() * diff;
    out(i) = c.log_normalizer() - 0.5 * diff.dot(pd);
    if (grads) grads->col(i) = -pd;
  }
}

inline double log_sum_exp(const Vector& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace detail

inline double log_density(const GmmSpec& spec, const Eigen::Ref<const Vector>& x) {
  detail::check_dim(spec, x.size());
  Vector terms;
  detail::component_terms(spec, x, terms, nullptr);
  return detail::log_sum_exp(terms);
}

inline double density(const GmmSpec& spec, const Eigen::Ref<const Vector>& x) {
  return std::exp(log_density(spec, x));
}

/// Posterior component probabilities f_i(x), computed in log space.
struct Responsibilities {
  Vector values;
};

inline Responsibilities responsibilities(const GmmSpec& spec, const Eigen::Ref<const Vector>& x) {
  detail::check_dim(spec, x.size());
  Vector terms;
  detail::component_terms(spec, x, terms, nullptr);
  const double m = terms.maxCoeff();
  Vector f = (terms.array() - m).exp().matrix();
  f /= f.sum();
  return {std::move(f)};
}

/// ∇ log p(x) = Σ_i f_i(x)·(−Σ_i⁻¹(x − μ_i)).
inline Vector score(const GmmSpec& spec, const Eigen::Ref<const Vector>& x) {
  detail::check_dim(spec, x.size());
  Vector terms;
  Matrix grads;
  detail::component_terms(spec, x, terms, &grads);
  const double m = terms.maxCoeff();
  Vector f = (terms.array() - m).exp().matrix();
  f /= f.sum();
  return grads * f;
}

/// ∇² log p(x) = Σ_i f_i (g_i g_iᵀ − Σ_i⁻¹) − s sᵀ with g_i the component scores.
inline Matrix score_jacobian(const GmmSpec& spec, const Eigen::Ref<const Vector>& x) {
  detail::check_dim(spec, x.size());
  if (spec.size() == 1) return -spec[0].precision();
  Vector terms;
  Matrix grads;
  detail::component_terms(spec, x, terms, &grads);
  const double m = terms.maxCoeff();
  Vector f = (terms.array() - m).exp().matrix();
  f /= f.sum();
  const Vector s = grads * f;
  const int d = spec.dim();
  Matrix jac = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const auto col = grads.col(static_cast<Eigen::Index>(i));
    const double fi = f(static_cast<Eigen::Index>(i));
    jac.noalias() += fi * (col * col.transpose());
    jac.noalias() -= fi * spec[i].precision();
  }
  jac.noalias() -= s * s.transpose();
  return 0.5 * (jac + jac.transpose());
}

/// Scratch buffers for block evaluation; reuse one per worker.
struct BlockWorkspace {
  Matrix diff;
  std::vector<Matrix> pdiff;
  std::vector<Eigen::ArrayXd> logt;  // one row of per-point log terms per component
  Eigen::ArrayXd colmax;
  Eigen::ArrayXd colsum;
};

namespace detail {

/// logt[i](j) = log α_i N_i(x_j); pdiff[i] = P_i (x_j − μ_i).
inline void component_log_terms(const GmmSpec& spec, const Eigen::Ref<const Matrix>& X, BlockWorkspace& ws) {
  const auto k = spec.size();
  const auto B = X.cols();
  const auto d = X.rows();
  ws.pdiff.resize(k);
  ws.logt.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& c = spec[i];
    auto& pd = ws.pdiff[i];
    auto& lt = ws.logt[i];
    ws.diff = X.colwise() - c.mean();
    pd.resize(d, B);
    if (d == 1)
      pd = c.precision()(0, 0) * ws.diff;
    else
      pd.noalias() = c.precision() * ws.diff;
    lt = ws.diff.row(0).array().transpose() * pd.row(0).array().transpose();
    for (Eigen::Index r = 1; r < d; ++r) lt += ws.diff.row(r).array().transpose() * pd.row(r).array().transpose();
    lt = c.log_normalizer() - 0.5 * lt;
  }
}

/// Turns ws.logt into normalized responsibilities in place; leaves the
/// per-point maximum and the normalizer in ws.colmax / ws.colsum.
inline void normalize_log_terms(BlockWorkspace& ws) {
  ws.colmax = ws.logt[0];
  for (std::size_t i = 1; i < ws.logt.size(); ++i) ws.colmax = ws.colmax.max(ws.logt[i]);
  ws.colsum.setZero(ws.colmax.size());
  for (auto& lt : ws.logt) {
    lt = (lt - ws.colmax).exp();
    ws.colsum += lt;
  }
}

}  // namespace detail

/// Score of every column of `X` (d×B) written to `out` (d×B).
inline void score_block(const GmmSpec& spec, const Eigen::Ref<const Matrix>& X, Eigen::Ref<Matrix> out,
                        BlockWorkspace& ws) {
  detail::component_log_terms(spec, X, ws);
  if (spec.size() == 1) {
    out = -ws.pdiff[0];
    return;
  }
  detail::normalize_log_terms(ws);
  const Eigen::ArrayXd inv = ws.colsum.inverse();
  out.setZero();
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const Eigen::ArrayXd f = ws.logt[i] * inv;
    out.array() -= ws.pdiff[i].array().rowwise() * f.transpose();
  }
}

/// Log-density of every column of `X`.
inline Eigen::ArrayXd log_density_block(const GmmSpec& spec, const Eigen::Ref<const Matrix>& X,
                                        BlockWorkspace& ws) {
  detail::component_log_terms(spec, X, ws);
  if (spec.size() == 1) return ws.logt[0];
  detail::normalize_log_terms(ws);
  return ws.colmax + ws.colsum.log();
}

/// Draws one point from the mixture.
inline void draw_point(const GmmSpec& spec, ChainRng& rng, Eigen::Ref<Vector> out, Vector& xi) {
  const double u = rng.uniform();
  std::size_t pick = spec.size() - 1;
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < spec.size(); ++i) {
    acc += spec[i].weight();
    if (u < acc) {
      pick = i;
      break;
    }
  }
  for (Eigen::Index j = 0; j < xi.size(); ++j) xi(j) = rng.normal();
  const auto& c = spec[pick];
  out = c.mean();
  out.noalias() += c.cholesky().triangularView<Eigen::Lower>() * xi;
}

/// n i.i.d. draws; block b of kBlockSize points uses
/// ChainRng(seed, kMixtureSampling, b), so the batch depends only on
/// (spec, n, seed).
inline SampleBatch sample(const GmmSpec& spec, std::size_t n, std::uint64_t seed, unsigned threads = 1) {
  if (n < 1) throw Error(Errc::InvalidArgument, "sample count must be at least 1");
  SampleBatch batch;
  batch.points.resize(spec.dim(), static_cast<Eigen::Index>(n));
  batch.meta.seed = seed;
  batch.meta.solver = "mixture";
  for_each_block(n, threads, [&](std::size_t block, std::size_t begin, std::size_t end) {
    Vector xi(spec.dim());
    ChainRng rng(seed, stream::kMixtureSampling, block);
    for (std::size_t i = begin; i < end; ++i) {
      draw_point(spec, rng, batch.points.col(static_cast<Eigen::Index>(i)), xi);
    }
  });
  return batch;
}

/// Analytic mixture mean Σ α_i μ_i.
inline Vector mixture_mean(const GmmSpec& spec) {
  Vector m = Vector::Zero(spec.dim());
  for (const auto& c : spec.components()) m += c.weight() * c.mean();
  return m;
}

/// Analytic mixture covariance Σ α_i (Σ_i + μ_i μ_iᵀ) − m mᵀ.
inline Matrix mixture_covariance(const GmmSpec& spec) {
  const Vector m = mixture_mean(spec);
  Matrix s = Matrix::Zero(spec.dim(), spec.dim());
  for (const auto& c : spec.components()) s += c.weight() * (c.covariance() + c.mean() * c.mean().transpose());
  return s - m * m.transpose();
}

/// One-dimensional marginal along coordinate `axis`.
inline GmmSpec coordinate_marginal(const GmmSpec& spec, int axis) {
  if (axis < 0 || axis >= spec.dim()) throw Error(Errc::DimensionMismatch, "axis out of range");
  RawMixture raw;
  raw.dim = 1;
  for (const auto& c : spec.components())
    raw.components.push_back({c.weight(), Vector::Constant(1, c.mean()(axis)), Matrix::Constant(1, 1, c.covariance()(axis, axis))});
  return validate_spec(raw);
}

}  // namespace gmmdiff
