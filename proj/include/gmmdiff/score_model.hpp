#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "gmmdiff/forward.hpp"
#include "gmmdiff/gmm.hpp"
#include "gmmdiff/random.hpp"

namespace gmmdiff {

enum class ScoreKind { Exact, Perturbed };

/// Seed-determined smooth vector field u(x, t) built from random Fourier
/// features (frequencies ~ N(0, I), i.e. bandwidth 1):
///   u(x, t) = scale · Σ_j a_j cos(ω_j·x + ν_j t + φ_j).
/// `scale` makes E‖u‖² = 1 under t ~ U[0, horizon], x ~ p_t.
class PerturbationField {
 public:
  static constexpr int kFeatures = 64;
  static constexpr std::size_t kNormalizationProbes = 8192;

  PerturbationField() = default;

  PerturbationField(const GmmSpec& spec0, std::uint64_t seed, double horizon) {
    const int d = spec0.dim();
    omega_.resize(kFeatures, d);
    amp_.resize(d, kFeatures);
    freq_t_.resize(kFeatures);
    phase_.resize(kFeatures);
    ChainRng rng(seed, stream::kPerturbationField, 0);
    for (int j = 0; j < kFeatures; ++j) {
      for (int c = 0; c < d; ++c) omega_(j, c) = static_cast<float>(rng.normal());
      for (int c = 0; c < d; ++c) amp_(c, j) = static_cast<float>(rng.normal());
      freq_t_(j) = rng.normal();
      phase_(j) = 2.0 * std::numbers::pi * rng.uniform();
    }
    scale_ = 1.0;

    // Unit RMS under the reference measure.
    ChainRng probe(seed, stream::kPerturbationField, 1);
    Vector xi(d);
    Vector x(d);
    Matrix col(d, 1);
    Matrix u(d, 1);
    Workspace ws;
    double acc = 0.0;
    for (std::size_t i = 0; i < kNormalizationProbes; ++i) {
      const double t = horizon * probe.uniform();
      const auto ou = ou_coefficients(t);
      draw_point(spec0, probe, x, xi);
      for (int j = 0; j < d; ++j) xi(j) = probe.normal();
      col.col(0) = ou.a * x + ou.b * xi;
      u.setZero();
      add_block(t, col, 1.0, u, ws);
      acc += u.col(0).squaredNorm();
    }
    scale_ = 1.0 / std::sqrt(acc / static_cast<double>(kNormalizationProbes));
  }

  struct Workspace {
    Eigen::MatrixXf w;  // [ω | ν t + φ]
    Eigen::MatrixXf x;  // [x; 1]
    Eigen::MatrixXf arg;
    Eigen::MatrixXf cosv;
    Eigen::MatrixXf sum;
  };

  /// out += weight · u(·, t) for every column of X. Evaluated in single
  /// precision so the cosines vectorize; the time phase rides along as an
  /// extra input row of ones.
  void add_block(double t, const Eigen::Ref<const Matrix>& X, double weight, Eigen::Ref<Matrix> out,
                 Workspace& ws) const {
    const auto d = X.rows();
    ws.w.resize(kFeatures, d + 1);
    ws.w.leftCols(d) = omega_;
    ws.w.col(d) = (freq_t_ * t + phase_).cast<float>().matrix();
    ws.x.resize(d + 1, X.cols());
    ws.x.topRows(d) = X.cast<float>();
    ws.x.row(d).setOnes();
    ws.arg.noalias() = ws.w * ws.x;
    ws.cosv = ws.arg.array().cos().matrix();
    ws.sum.noalias() = amp_ * ws.cosv;
    out += (weight * scale_) * ws.sum.cast<double>();
  }

  double scale() const { return scale_; }

 private:
  Eigen::MatrixXf omega_;   // kFeatures × d
  Eigen::MatrixXf amp_;     // d × kFeatures
  Eigen::ArrayXd freq_t_;
  Eigen::ArrayXd phase_;
  double scale_ = 1.0;
};

/// s_t(x): the exact mixture score ∇log p_t(x), optionally plus ε₀·u(x, t).
class ScoreModel {
 public:
  /// Score of one fixed time, with p_t precomputed.
  class Slice {
   public:
    double t() const { return t_; }
    const GmmSpec& spec() const { return spec_t_; }

    struct Workspace {
      BlockWorkspace gmm;
      PerturbationField::Workspace field;
    };

    void evaluate(const Eigen::Ref<const Matrix>& X, Eigen::Ref<Matrix> out, Workspace& ws) const {
      score_block(spec_t_, X, out, ws.gmm);
      if (model_->epsilon0_ > 0.0) model_->field_->add_block(t_, X, model_->epsilon0_, out, ws.field);
    }

   private:
    friend class ScoreModel;
    Slice(const ScoreModel* model, double t, GmmSpec spec_t) : model_(model), t_(t), spec_t_(std::move(spec_t)) {}
    const ScoreModel* model_;
    double t_;
    GmmSpec spec_t_;
  };

  ScoreKind kind() const { return kind_; }
  double epsilon0() const { return epsilon0_; }
  std::uint64_t seed() const { return seed_; }
  const GmmSpec& spec0() const { return spec0_; }
  int dim() const { return spec0_.dim(); }

  Slice slice(double t) const { return Slice(this, t, marginal_at(spec0_, t)); }

  Vector operator()(double t, const Eigen::Ref<const Vector>& x) const {
    detail::check_dim(spec0_, x.size());
    const auto s = slice(t);
    Matrix out(dim(), 1);
    typename Slice::Workspace ws;
    s.evaluate(x, out, ws);
    return out.col(0);
  }

  /// The exact part ∇log p_t(x) alone.
  Vector exact(double t, const Eigen::Ref<const Vector>& x) const { return score(marginal_at(spec0_, t), x); }

 private:
  friend ScoreModel make_score_model(const GmmSpec&, ScoreKind, double, std::uint64_t, double);
  ScoreKind kind_ = ScoreKind::Exact;
  GmmSpec spec0_;
  double epsilon0_ = 0.0;
  std::uint64_t seed_ = 0;
  std::shared_ptr<const PerturbationField> field_;
};

/// Builds s_t. A perturbed model with epsilon0 = 0 behaves exactly like the
/// exact one. `horizon` fixes the time range over which u has unit RMS.
inline ScoreModel make_score_model(const GmmSpec& spec0, ScoreKind kind, double epsilon0 = 0.0,
                                   std::uint64_t seed = 0, double horizon = 8.0) {
  if (!(epsilon0 >= 0.0) || !std::isfinite(epsilon0))
    throw Error(Errc::NegativeEpsilon, "epsilon0 must be finite and nonnegative");
  if (!(horizon > 0.0)) throw Error(Errc::InvalidHorizon, "normalization horizon must be positive");
  ScoreModel m;
  m.kind_ = kind;
  m.spec0_ = spec0;
  m.seed_ = seed;
  m.epsilon0_ = kind == ScoreKind::Perturbed ? epsilon0 : 0.0;
  if (m.epsilon0_ > 0.0) m.field_ = std::make_shared<const PerturbationField>(spec0, seed, horizon);
  return m;
}

}  // namespace gmmdiff
