#pragma once

#include <cmath>

#include "gmmdiff/gmm.hpp"

namespace gmmdiff {

/// Coefficients of the OU forward marginal x_t = a·x_0 + b·z.
struct OuCoefficients {
  double a = 1.0;  // e^{-t}
  double b = 0.0;  // sqrt(1 - e^{-2t})
  double t = 0.0;
};

inline OuCoefficients ou_coefficients(double t) {
  if (!std::isfinite(t)) throw Error(Errc::InvalidArgument, "time must be finite");
  if (t < 0.0) throw Error(Errc::NegativeTime, "time " + std::to_string(t) + " is negative");
  // expm1 keeps b accurate for small t, where b ~ sqrt(2t).
  return {std::exp(-t), std::sqrt(-std::expm1(-2.0 * t)), t};
}

/// Law of a·x + b·z for x from `spec` and independent z ~ N(0, I):
/// means a·μ_i, covariances a²Σ_i + b²I, same weights.
inline GmmSpec affine_push(const GmmSpec& spec, double a, double b) {
  if (a == 0.0) throw Error(Errc::ZeroScale, "scale a must be nonzero");
  if (!(b >= 0.0) || !std::isfinite(a) || !std::isfinite(b))
    throw Error(Errc::InvalidArgument, "noise scale b must be finite and nonnegative");
  RawMixture raw;
  raw.dim = spec.dim();
  const double a2 = a * a;
  const double b2 = b * b;
  for (const auto& c : spec.components()) {
    Matrix cov = a2 * c.covariance();
    cov.diagonal().array() += b2;
    raw.components.push_back({c.weight(), a * c.mean(), std::move(cov)});
  }
  return validate_spec(raw);
}

/// p_t for the OU process started at `spec0`.
inline GmmSpec marginal_at(const GmmSpec& spec0, double t) {
  const auto ou = ou_coefficients(t);
  if (t == 0.0) return spec0;
  return affine_push(spec0, ou.a, ou.b);
}

}  // namespace gmmdiff
