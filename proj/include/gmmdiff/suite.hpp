#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gmmdiff/gmm.hpp"
#include "gmmdiff/random.hpp"

namespace gmmdiff {

/// Equal-weight 1D mixture of N(−2, 0.25) and N(2, 0.25).
inline GmmSpec standard_mixture() {
  RawMixture raw;
  raw.dim = 1;
  raw.components.push_back({0.5, Vector::Constant(1, -2.0), Matrix::Constant(1, 1, 0.25)});
  raw.components.push_back({0.5, Vector::Constant(1, 2.0), Matrix::Constant(1, 1, 0.25)});
  return validate_spec(raw);
}

/// Random well-conditioned mixture: covariance eigenvalues uniform in
/// [eig_lo, eig_hi] under a random rotation, means uniform in [−spread, spread]^d,
/// weights from normalized uniforms bounded away from 0.
inline GmmSpec random_spec(int d, int k, ChainRng& rng, double eig_lo = 0.25, double eig_hi = 4.0,
                           double spread = 3.0) {
  RawMixture raw;
  raw.dim = d;
  std::vector<double> w(static_cast<std::size_t>(k));
  double total = 0.0;
  for (auto& v : w) {
    v = 0.2 + rng.uniform();
    total += v;
  }
  for (int i = 0; i < k; ++i) {
    Matrix G(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) G(r, c) = rng.normal();
    const Eigen::HouseholderQR<Matrix> qr(G);
    const Matrix Q = qr.householderQ();
    Vector eig(d);
    for (int r = 0; r < d; ++r) eig(r) = eig_lo + (eig_hi - eig_lo) * rng.uniform();
    Matrix cov = Q * eig.asDiagonal() * Q.transpose();
    cov = 0.5 * (cov + cov.transpose());
    Vector mean(d);
    for (int r = 0; r < d; ++r) mean(r) = spread * (2.0 * rng.uniform() - 1.0);
    raw.components.push_back({w[static_cast<std::size_t>(i)] / total, mean, cov});
  }
  // Renormalize exactly: the quotient sum can miss 1 by an ulp or two.
  double s = 0.0;
  for (const auto& c : raw.components) s += c.weight;
  for (auto& c : raw.components) c.weight /= s;
  return validate_spec(raw);
}

struct NamedSpec {
  std::string name;
  GmmSpec spec;
};

/// The fixed verification suite: d ∈ {1, 2} × k ∈ {1, 2, 5}, plus the
/// standard mixture. Built from a fixed seed so it never changes between runs.
inline std::vector<NamedSpec> standard_suite() {
  std::vector<NamedSpec> out;
  out.push_back({"standard_mixture", standard_mixture()});
  for (int d : {1, 2}) {
    for (int k : {1, 2, 5}) {
      ChainRng rng(20240601, stream::kSuite, static_cast<std::uint64_t>(10 * d + k));
      out.push_back({"d" + std::to_string(d) + "_k" + std::to_string(k), random_spec(d, k, rng)});
    }
  }
  return out;
}

}  // namespace gmmdiff
