#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gmmdiff/random.hpp"
#include "gmmdiff/sample_batch.hpp"
#include "gmmdiff/schedule.hpp"
#include "gmmdiff/score_model.hpp"

namespace gmmdiff {

enum class Scheme { EulerMaruyama, ExponentialIntegrator };
enum class CorrectorVariant { Overdamped, Underdamped };

constexpr const char* scheme_name(Scheme s) { return s == Scheme::EulerMaruyama ? "em" : "ei"; }
constexpr const char* variant_name(CorrectorVariant v) {
  return v == CorrectorVariant::Overdamped ? "dpom" : "dpum";
}

/// Coordinates beyond this magnitude abort a run as diverged.
inline constexpr double kDivergenceLimit = 1e8;

/// Euler–Maruyama step of dy = (y + 2 s) dt + √2 dw with y and s frozen:
/// y + h(y + 2s) + √(2h)·noise.
template <class Y, class S, class Z>
typename Y::PlainObject step_em(const Eigen::MatrixBase<Y>& y, double h, const Eigen::MatrixBase<S>& s,
                                const Eigen::MatrixBase<Z>& noise) {
  return y + h * (y + 2.0 * s) + std::sqrt(2.0 * h) * noise;
}

/// Exponential-integrator step: exact solution of dy = (y + 2 s) dt + √2 dw
/// over [0, h] with s frozen,
///   e^h y + 2(e^h − 1) s + √(e^{2h} − 1)·noise,
/// written as y + (e^h − 1)(y + 2s) to keep precision for small h.
template <class Y, class S, class Z>
typename Y::PlainObject step_ei(const Eigen::MatrixBase<Y>& y, double h, const Eigen::MatrixBase<S>& s,
                                const Eigen::MatrixBase<Z>& noise) {
  return y + std::expm1(h) * (y + 2.0 * s) + std::sqrt(std::expm1(2.0 * h)) * noise;
}

/// Probability-flow predictor dy = (y + s) dt with s frozen: y + (e^h − 1)(y + s).
template <class Y, class S>
typename Y::PlainObject step_flow(const Eigen::MatrixBase<Y>& y, double h, const Eigen::MatrixBase<S>& s) {
  return y + std::expm1(h) * (y + s);
}

/// Unadjusted Langevin step toward the density whose score is s: x + h s + √(2h)·noise.
template <class Y, class S, class Z>
typename Y::PlainObject step_langevin(const Eigen::MatrixBase<Y>& x, double h, const Eigen::MatrixBase<S>& s,
                                      const Eigen::MatrixBase<Z>& noise) {
  return x + h * s + std::sqrt(2.0 * h) * noise;
}

namespace detail {

inline void fill_normal(Eigen::Ref<Matrix> Z, std::vector<ChainRng>& rngs) {
  for (Eigen::Index c = 0; c < Z.cols(); ++c) {
    auto& rng = rngs[static_cast<std::size_t>(c)];
    for (Eigen::Index r = 0; r < Z.rows(); ++r) Z(r, c) = rng.normal();
  }
}

inline void guard_finite(const Eigen::Ref<const Matrix>& Y, std::size_t step, std::size_t first_chain) {
  if (!Y.allFinite() || (Y.array().abs() > kDivergenceLimit).any())
    throw Error(Errc::NonFiniteState,
                "state diverged at step " + std::to_string(step) + " (block starting at chain " +
                    std::to_string(first_chain) + ")",
                static_cast<std::int64_t>(step));
}

inline std::vector<ChainRng> block_rngs(std::uint64_t seed, std::size_t begin, std::size_t end) {
  std::vector<ChainRng> rngs;
  rngs.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) rngs.emplace_back(seed, stream::kSolverNoise, i);
  return rngs;
}

}  // namespace detail

struct SamplerOptions {
  unsigned threads = 1;
};

/// Reverse-time SDE sampler. Starts from ŷ ~ N(0, I) and walks the grid
/// backwards: reverse step k uses the score at forward time t_{N−k} and step
/// h = t_{N−k} − t_{N−k−1}. Returns draws of q̂ at forward time δ = t_0.
/// Chain i owns ChainRng(seed, kSolverNoise, i), so output is independent of
/// the worker count.
inline SampleBatch run_sampler(const ScoreModel& model, const TimeGrid& grid, Scheme scheme, std::size_t n,
                               std::uint64_t seed, SamplerOptions opts = {}) {
  if (n < 1) throw Error(Errc::InvalidArgument, "sample count must be at least 1");
  if (grid.N() < 1) throw Error(Errc::InvalidStepCount, "grid has no steps");
  const int d = model.dim();
  const std::size_t N = grid.N();
  std::vector<ScoreModel::Slice> slices;
  slices.reserve(N);
  for (std::size_t j = 0; j < N; ++j) slices.push_back(model.slice(grid.points[N - j]));

  SampleBatch out;
  out.points.resize(d, static_cast<Eigen::Index>(n));
  out.meta = {seed, scheme_name(scheme), grid.label, grid.T, grid.delta, model.epsilon0()};

  for_each_block(n, opts.threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    const auto B = static_cast<Eigen::Index>(end - begin);
    auto rngs = detail::block_rngs(seed, begin, end);
    Matrix Y(d, B), S(d, B), Z(d, B);
    ScoreModel::Slice::Workspace ws;
    detail::fill_normal(Y, rngs);
    for (std::size_t k = 0; k < N; ++k) {
      const double h = grid.step(N - k);
      slices[k].evaluate(Y, S, ws);
      detail::fill_normal(Z, rngs);
      if (scheme == Scheme::EulerMaruyama)
        Y = step_em(Y, h, S, Z);
      else
        Y = step_ei(Y, h, S, Z);
      detail::guard_finite(Y, k, begin);
    }
    out.points.middleCols(static_cast<Eigen::Index>(begin), B) = Y;
  });
  return out;
}

struct PredictorCorrectorConfig {
  double T = 6.0;
  double h_pred = 1.0 / 128.0;
  double h_corr = 0.01;
  std::size_t corr_steps = 1;
  CorrectorVariant variant = CorrectorVariant::Overdamped;
  double friction = 2.0;
  double delta = 0.0;
};

/// Grid of predictor nodes: uniform on [δ, T] with the largest step ≤ h_pred.
inline TimeGrid predictor_grid(const PredictorCorrectorConfig& cfg) {
  if (!(cfg.h_pred > 0.0)) throw Error(Errc::InvalidArgument, "h_pred must be positive");
  if (!(cfg.delta >= 0.0) || !(cfg.delta < cfg.T))
    throw Error(Errc::DeltaExceedsHorizon, "early stop delta must lie in [0, T)");
  const auto N = static_cast<std::size_t>(std::ceil((cfg.T - cfg.delta) / cfg.h_pred - 1e-9));
  return uniform_grid(cfg.T, std::max<std::size_t>(N, 1), cfg.delta);
}

/// Predictor–corrector sampler. Predictor: probability-flow ODE step in
/// exponential-integrator form. Corrector, at each new node t: `corr_steps`
/// Langevin steps targeting p_t, either overdamped (ULA) or underdamped
/// (BAOAB, unit mass, momentum redrawn from N(0, I) at every node).
inline SampleBatch run_predictor_corrector(const ScoreModel& model, const PredictorCorrectorConfig& cfg,
                                           std::size_t n, std::uint64_t seed, SamplerOptions opts = {}) {
  if (n < 1) throw Error(Errc::InvalidArgument, "sample count must be at least 1");
  if (!(cfg.h_corr > 0.0)) throw Error(Errc::InvalidArgument, "h_corr must be positive");
  if (cfg.variant == CorrectorVariant::Underdamped && !(cfg.friction > 0.0))
    throw Error(Errc::InvalidArgument, "friction must be positive");
  const TimeGrid grid = predictor_grid(cfg);
  const int d = model.dim();
  const std::size_t N = grid.N();
  // slices[j] holds forward time t_j.
  std::vector<ScoreModel::Slice> slices;
  slices.reserve(N + 1);
  for (std::size_t j = 0; j <= N; ++j) slices.push_back(model.slice(grid.points[j]));

  SampleBatch out;
  out.points.resize(d, static_cast<Eigen::Index>(n));
  out.meta = {seed, variant_name(cfg.variant), grid.label, grid.T, grid.delta, model.epsilon0()};

  const double hc = cfg.h_corr;
  const double eta = std::exp(-cfg.friction * hc);
  const double kick = std::sqrt(-std::expm1(-2.0 * cfg.friction * hc));

  for_each_block(n, opts.threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    const auto B = static_cast<Eigen::Index>(end - begin);
    auto rngs = detail::block_rngs(seed, begin, end);
    Matrix Y(d, B), S(d, B), Z(d, B), V(d, B);
    ScoreModel::Slice::Workspace ws;
    detail::fill_normal(Y, rngs);
    for (std::size_t k = 0; k < N; ++k) {
      const std::size_t j = N - k;
      slices[j].evaluate(Y, S, ws);
      Y = step_flow(Y, grid.step(j), S);
      const auto& target = slices[j - 1];
      if (cfg.corr_steps > 0) {
        if (cfg.variant == CorrectorVariant::Overdamped) {
          for (std::size_t m = 0; m < cfg.corr_steps; ++m) {
            target.evaluate(Y, S, ws);
            detail::fill_normal(Z, rngs);
            Y = step_langevin(Y, hc, S, Z);
          }
        } else {
          detail::fill_normal(V, rngs);
          target.evaluate(Y, S, ws);
          for (std::size_t m = 0; m < cfg.corr_steps; ++m) {
            V += 0.5 * hc * S;
            Y += 0.5 * hc * V;
            detail::fill_normal(Z, rngs);
            V = eta * V + kick * Z;
            Y += 0.5 * hc * V;
            target.evaluate(Y, S, ws);
            V += 0.5 * hc * S;
          }
        }
      }
      detail::guard_finite(Y, k, begin);
    }
    out.points.middleCols(static_cast<Eigen::Index>(begin), B) = Y;
  });
  return out;
}

}  // namespace gmmdiff
