#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "gmmdiff/bounds.hpp"
#include "gmmdiff/gmm.hpp"
#include "gmmdiff/sample_batch.hpp"

namespace gmmdiff {

/// Axis-aligned regular histogram in at most three dimensions.
struct HistogramGrid {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<int> bins;

  int dim() const { return static_cast<int>(lo.size()); }

  static HistogramGrid uniform(int d, double lo, double hi, int bins) {
    return {std::vector<double>(static_cast<std::size_t>(d), lo), std::vector<double>(static_cast<std::size_t>(d), hi),
            std::vector<int>(static_cast<std::size_t>(d), bins)};
  }

  std::size_t cells() const {
    std::size_t n = 1;
    for (int b : bins) n *= static_cast<std::size_t>(b);
    return n;
  }

  void validate() const {
    if (lo.empty() || lo.size() != hi.size() || lo.size() != bins.size())
      throw Error(Errc::InvalidArgument, "histogram grid axes are inconsistent");
    if (lo.size() > 3) throw Error(Errc::DimensionTooHigh, "histograms support at most 3 dimensions");
    for (std::size_t a = 0; a < lo.size(); ++a) {
      if (!(lo[a] < hi[a])) throw Error(Errc::InvalidArgument, "histogram axis needs lo < hi");
      if (bins[a] < 10) throw Error(Errc::InvalidArgument, "histogram axis needs at least 10 bins");
    }
  }

  /// Flat cell index of x, or nullopt when x lies outside the grid.
  template <class V>
  std::optional<std::size_t> cell_of(const V& x) const {
    std::size_t idx = 0;
    std::size_t stride = 1;
    for (std::size_t a = 0; a < lo.size(); ++a) {
      const double u = (x(static_cast<Eigen::Index>(a)) - lo[a]) / (hi[a] - lo[a]);
      if (!(u >= 0.0) || !(u < 1.0)) return std::nullopt;
      const auto b = std::min(static_cast<std::size_t>(u * bins[a]), static_cast<std::size_t>(bins[a] - 1));
      idx += b * stride;
      stride *= static_cast<std::size_t>(bins[a]);
    }
    return idx;
  }
};

namespace detail {

inline void check_batch(const SampleBatch& s, const HistogramGrid& grid) {
  grid.validate();
  if (s.size() == 0) throw Error(Errc::EmptyBatch, "sample batch is empty");
  if (s.dim() != grid.dim()) throw Error(Errc::DimensionMismatch, "sample dimension differs from histogram grid");
}

/// Empirical cell frequencies; the last entry is the out-of-grid mass.
inline std::vector<double> empirical_masses(const SampleBatch& s, const HistogramGrid& grid) {
  std::vector<double> m(grid.cells() + 1, 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto c = grid.cell_of(s.point(i));
    m[c ? *c : grid.cells()] += 1.0;
  }
  for (auto& v : m) v /= static_cast<double>(s.size());
  return m;
}

}  // namespace detail

/// Reference cell masses by the midpoint rule with 4 sub-points per axis;
/// the last entry is the mass outside the grid, 1 − Σ cells (clamped at 0).
inline std::vector<double> reference_masses(const GmmSpec& ref, const HistogramGrid& grid) {
  grid.validate();
  if (ref.dim() != grid.dim()) throw Error(Errc::DimensionMismatch, "reference dimension differs from histogram grid");
  constexpr int kSub = 4;
  const int d = grid.dim();
  const std::size_t cells = grid.cells();
  std::size_t subs = 1;
  for (int a = 0; a < d; ++a) subs *= kSub;
  double sub_volume = 1.0;
  std::vector<double> width(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    width[ua] = (grid.hi[ua] - grid.lo[ua]) / grid.bins[ua];
    sub_volume *= width[ua] / kSub;
  }
  std::vector<double> masses(cells + 1, 0.0);
  BlockWorkspace ws;
  constexpr std::size_t kChunk = 4096;
  Matrix pts(d, static_cast<Eigen::Index>(kChunk));
  std::vector<std::size_t> owner(kChunk);
  std::size_t fill = 0;
  auto flush = [&] {
    if (fill == 0) return;
    const Eigen::ArrayXd lp = log_density_block(ref, pts.leftCols(static_cast<Eigen::Index>(fill)), ws);
    for (std::size_t i = 0; i < fill; ++i) masses[owner[i]] += std::exp(lp(static_cast<Eigen::Index>(i))) * sub_volume;
    fill = 0;
  };
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::size_t rem = cell;
    std::vector<std::size_t> bidx(static_cast<std::size_t>(d));
    for (int a = 0; a < d; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      bidx[ua] = rem % static_cast<std::size_t>(grid.bins[ua]);
      rem /= static_cast<std::size_t>(grid.bins[ua]);
    }
    for (std::size_t s = 0; s < subs; ++s) {
      std::size_t sr = s;
      for (int a = 0; a < d; ++a) {
        const auto ua = static_cast<std::size_t>(a);
        const auto si = sr % kSub;
        sr /= kSub;
        pts(a, static_cast<Eigen::Index>(fill)) =
            grid.lo[ua] + width[ua] * (static_cast<double>(bidx[ua]) + (static_cast<double>(si) + 0.5) / kSub);
      }
      owner[fill] = cell;
      if (++fill == kChunk) flush();
    }
  }
  flush();
  double inside = 0.0;
  for (std::size_t c = 0; c < cells; ++c) inside += masses[c];
  masses[cells] = std::max(0.0, 1.0 - inside);
  return masses;
}

namespace detail {
inline double half_l1(const std::vector<double>& p, const std::vector<double>& q) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
  return std::min(1.0, 0.5 * acc);
}
}  // namespace detail

/// Histogram total variation between a batch and a density reference.
inline double tv_histogram(const SampleBatch& samples, const GmmSpec& reference, const HistogramGrid& grid) {
  detail::check_batch(samples, grid);
  return detail::half_l1(detail::empirical_masses(samples, grid), reference_masses(reference, grid));
}

/// Histogram total variation between two batches; symmetric in its arguments.
inline double tv_histogram(const SampleBatch& samples, const SampleBatch& reference, const HistogramGrid& grid) {
  detail::check_batch(samples, grid);
  detail::check_batch(reference, grid);
  return detail::half_l1(detail::empirical_masses(samples, grid), detail::empirical_masses(reference, grid));
}

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

struct HistogramKl {
  double value = 0.0;
  double se = 0.0;            // delta-method standard error
  std::size_t clamped = 0;    // occupied cells whose reference mass was raised to the floor
};

inline constexpr double kReferenceMassFloor = 1e-12;

/// KL(q̂_emp ‖ p_ref) over histogram cells, out-of-grid mass as one extra cell.
inline HistogramKl kl_histogram(const SampleBatch& samples, const GmmSpec& reference, const HistogramGrid& grid) {
  detail::check_batch(samples, grid);
  const auto emp = detail::empirical_masses(samples, grid);
  const auto ref = reference_masses(reference, grid);
  HistogramKl out;
  double second = 0.0;
  for (std::size_t c = 0; c < emp.size(); ++c) {
    if (emp[c] <= 0.0) continue;
    double r = ref[c];
    if (r < kReferenceMassFloor) {
      r = kReferenceMassFloor;
      ++out.clamped;
    }
    const double l = std::log(emp[c] / r);
    out.value += emp[c] * l;
    second += emp[c] * l * l;
  }
  const double var = std::max(0.0, second - out.value * out.value);
  out.se = std::sqrt(var / static_cast<double>(samples.size()));
  return out;
}

/// Monte-Carlo KL(p ‖ q) = E_p[log p − log q] with its standard error.
inline Estimate kl_mc(const GmmSpec& p, const GmmSpec& q, std::size_t n, std::uint64_t seed) {
  if (p.dim() != q.dim()) throw Error(Errc::DimensionMismatch, "KL arguments differ in dimension");
  if (n < 2) throw Error(Errc::InvalidArgument, "kl_mc needs at least 2 draws");
  const auto draws = sample(p, n, seed);
  BlockWorkspace ws;
  double sum = 0.0;
  double sum2 = 0.0;
  constexpr Eigen::Index kChunk = 4096;
  for (Eigen::Index start = 0; start < draws.points.cols(); start += kChunk) {
    const auto len = std::min(kChunk, draws.points.cols() - start);
    const auto block = draws.points.middleCols(start, len);
    const Eigen::ArrayXd diff = log_density_block(p, block, ws) - log_density_block(q, block, ws);
    sum += diff.sum();
    sum2 += diff.square().sum();
  }
  const double nn = static_cast<double>(n);
  const double mean = sum / nn;
  const double var = std::max(0.0, (sum2 - nn * mean * mean) / (nn - 1.0));
  return {mean, std::sqrt(var / nn)};
}

/// Empirical moments of a batch with z-scores against a reference mixture.
struct MomentReport {
  Vector mean;
  Matrix covariance;
  double second = 0.0;  // E‖x‖²
  Vector mean_se;
  Matrix covariance_se;
  double second_se = 0.0;
  Vector mean_z;
  Matrix covariance_z;
  double second_z = 0.0;

  double max_abs_z() const {
    return std::max({mean_z.cwiseAbs().maxCoeff(), covariance_z.cwiseAbs().maxCoeff(), std::abs(second_z)});
  }
};

inline MomentReport moment_diagnostics(const SampleBatch& samples, const GmmSpec& reference) {
  if (samples.size() < 2) throw Error(Errc::EmptyBatch, "moment diagnostics need at least 2 points");
  if (samples.dim() != reference.dim()) throw Error(Errc::DimensionMismatch, "sample dimension differs from reference");
  const auto& X = samples.points;
  const int d = samples.dim();
  const double n = static_cast<double>(samples.size());
  MomentReport r;
  r.mean = X.rowwise().mean();
  const Matrix centered = X.colwise() - r.mean;
  r.covariance = centered * centered.transpose() / (n - 1.0);
  const Eigen::ArrayXd sq = X.colwise().squaredNorm().transpose();
  r.second = sq.mean();

  r.mean_se = (r.covariance.diagonal() / n).cwiseSqrt();
  r.covariance_se.resize(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const Eigen::ArrayXd prod = centered.row(i).array() * centered.row(j).array();
      const double m = prod.mean();
      r.covariance_se(i, j) = std::sqrt((prod - m).square().sum() / (n - 1.0) / n);
    }
  }
  r.second_se = std::sqrt((sq - r.second).square().sum() / (n - 1.0) / n);

  const Vector ref_mean = mixture_mean(reference);
  const Matrix ref_cov = mixture_covariance(reference);
  const double ref_second = second_moment(reference).M2;
  auto z = [](double est, double ref, double se) { return se > 0.0 ? (est - ref) / se : (est == ref ? 0.0 : 1e300); };
  r.mean_z.resize(d);
  r.covariance_z.resize(d, d);
  for (int i = 0; i < d; ++i) {
    r.mean_z(i) = z(r.mean(i), ref_mean(i), r.mean_se(i));
    for (int j = 0; j < d; ++j) r.covariance_z(i, j) = z(r.covariance(i, j), ref_cov(i, j), r.covariance_se(i, j));
  }
  r.second_z = z(r.second, ref_second, r.second_se);
  return r;
}

/// Spectral norm of a symmetric matrix by power iteration on MᵀM (at most
/// `max_iter` iterations, stopping when the estimate changes by less than
/// `tol` relative).
inline double spectral_norm(const Eigen::Ref<const Matrix>& M, int max_iter = 100, double tol = 1e-10) {
  const auto d = M.rows();
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = 1.0 / (1.0 + 0.37 * static_cast<double>(i));
  v.normalize();
  double est = 0.0;
  Vector w(d);
  for (int it = 0; it < max_iter; ++it) {
    w.noalias() = M * v;
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    v.noalias() = M.transpose() * w;
    const double vn = v.norm();
    if (vn == 0.0) return next;
    v /= vn;
    if (std::abs(next - est) <= tol * next) {
      est = next;
      break;
    }
    est = next;
  }
  return (M * v).norm();
}

struct SpectralProbe {
  double max_norm = 0.0;
  Vector argmax;
  std::size_t pass_count = 0;
};

/// Largest ‖∇score‖ over the points that satisfy the region conditions.
inline SpectralProbe jacobian_spectral_probe(const GmmSpec& spec_t, const SampleBatch& points,
                                             const ConditionParams& params) {
  if (points.dim() != spec_t.dim()) throw Error(Errc::DimensionMismatch, "point dimension differs from spec");
  SpectralProbe probe;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto x = points.point(i);
    if (!region_check(spec_t, x, params).inside) continue;
    ++probe.pass_count;
    const double norm = spectral_norm(score_jacobian(spec_t, x));
    if (probe.pass_count == 1 || norm > probe.max_norm) {
      probe.max_norm = norm;
      probe.argmax = x;
    }
  }
  if (probe.pass_count == 0) throw Error(Errc::NoPointsInRegion, "no probe point lies in the condition region");
  return probe;
}

/// Ordinary least squares of log y on log x.
struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double se = 0.0;
  double half_width = 0.0;  // 95% Student-t half-width
};

inline SlopeFit fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error(Errc::InvalidArgument, "slope fit needs paired values");
  if (x.size() < 4) throw Error(Errc::InvalidArgument, "slope fit needs at least 4 points");
  const auto m = x.size();
  std::vector<double> lx(m), ly(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw Error(Errc::InvalidArgument, "log-log fit needs positive values");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double n = static_cast<double>(m);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw Error(Errc::InvalidArgument, "slope fit needs distinct x values");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    rss += r * r;
  }
  fit.se = std::sqrt(rss / (n - 2.0) / sxx);
  const boost::math::students_t dist(n - 2.0);
  fit.half_width = boost::math::quantile(boost::math::complement(dist, 0.025)) * fit.se;
  return fit;
}

}  // namespace gmmdiff
