#include <cmath>

#include <gtest/gtest.h>

#include "gmmdiff/forward.hpp"
#include "gmmdiff/metrics.hpp"
#include "gmmdiff/suite.hpp"
#include "gmmdiff/verify.hpp"
#include "test_helpers.hpp"

using namespace gmmdiff;
using namespace gmmdiff::testing;

TEST(OuCoefficients, ClosedForm) {
  const auto c = ou_coefficients(1.0);
  EXPECT_NEAR(c.a, std::exp(-1.0), 1e-16);
  EXPECT_NEAR(c.b, std::sqrt(1.0 - std::exp(-2.0)), 1e-16);
  EXPECT_NEAR(c.a * c.a + c.b * c.b, 1.0, 1e-15);
  const auto z = ou_coefficients(0.0);
  EXPECT_EQ(z.a, 1.0);
  EXPECT_EQ(z.b, 0.0);
}

TEST(OuCoefficients, SmallTimeKeepsRelativePrecision) {
  // b(t) = √(1 − e^{−2t}) ≈ √(2t)(1 − t/2) for small t.
  const double t = 1e-12;
  EXPECT_NEAR(ou_coefficients(t).b / std::sqrt(2.0 * t), 1.0, 1e-11);
}

TEST(OuCoefficients, RejectsNegativeTime) {
  try {
    ou_coefficients(-0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NegativeTime);
  }
}

TEST(AffinePush, ScalesMeansAndCovariances) {
  const auto s = make_spec(2, {0.25, 0.75}, {vec({1, 2}), vec({-3, 0.5})},
                           {mat(2, {1, 0.2, 0.2, 2}), mat(2, {0.5, 0, 0, 0.5})});
  const auto p = affine_push(s, 0.5, 2.0);
  ASSERT_EQ(p.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(p[i].weight(), s[i].weight());
    EXPECT_LE((p[i].mean() - 0.5 * s[i].mean()).cwiseAbs().maxCoeff(), 1e-15);
    const Matrix expected = 0.25 * s[i].covariance() + 4.0 * Matrix::Identity(2, 2);
    EXPECT_LE((p[i].covariance() - expected).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(AffinePush, RejectsZeroScale) {
  try {
    affine_push(standard_normal(1), 0.0, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ZeroScale);
  }
}

TEST(AffinePush, SingularComponentBecomesRegularWithNoise) {
  // a → tiny makes a²Σ negligible; b > 0 keeps the result positive definite.
  const auto p = affine_push(gaussian_1d(0, 1e-6), 1e-3, 1.0);
  EXPECT_NEAR(p[0].covariance()(0, 0), 1.0, 1e-11);
}

TEST(MarginalAt, TimeZeroIsIdentity) {
  const auto s = standard_mixture();
  const auto m = marginal_at(s, 0.0);
  EXPECT_EQ(m[0].mean(), s[0].mean());
  EXPECT_EQ(m[1].covariance(), s[1].covariance());
}

TEST(MarginalAt, StandardNormalIsStationary) {
  for (double t : {0.1, 1.0, 5.0}) {
    const auto m = marginal_at(standard_normal(3), t);
    EXPECT_LE(m[0].mean().cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LE((m[0].covariance() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(MarginalAt, LargeTimeApproachesPrior) {
  const auto m = marginal_at(standard_mixture(), 20.0);
  for (const auto& c : m.components()) {
    EXPECT_NEAR(c.mean()(0), 0.0, 1e-8);
    EXPECT_NEAR(c.covariance()(0, 0), 1.0, 1e-12);
  }
}

TEST(MarginalAt, SemigroupProperty) {
  // Pushing to s then by t equals pushing to s + t.
  const auto s = standard_mixture();
  const auto a = marginal_at(marginal_at(s, 0.4), 0.7);
  const auto b = marginal_at(s, 1.1);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_NEAR(a[i].mean()(0), b[i].mean()(0), 1e-14);
    EXPECT_NEAR(a[i].covariance()(0, 0), b[i].covariance()(0, 0), 1e-14);
  }
}

TEST(MarginalAt, MatchesForwardMonteCarlo) {
  const auto spec0 = make_spec(2, {0.3, 0.7}, {vec({-2, 1}), vec({1.5, -1})},
                               {mat(2, {0.5, 0.1, 0.1, 0.3}), mat(2, {0.2, 0, 0, 0.8})});
  const double t = 0.5;
  const auto mc = forward_mc(spec0, t, 50000, 17);
  const auto rep = moment_diagnostics(mc, marginal_at(spec0, t));
  EXPECT_LE(rep.max_abs_z(), 4.5);
  EXPECT_LE(max_marginal_tv(mc, marginal_at(spec0, t)), 0.03);
}

TEST(MarginalAt, MixtureStructurePreserved) {
  ChainRng rng(4, 0, 0);
  const auto report = verify_mixture(random_spec(2, 3, rng), {0.1, 1.0}, 20000, 8);
  for (const auto& c : report.checks) {
    if (c.name.find("weight_change") != std::string::npos || c.name.find("count_change") != std::string::npos) {
      EXPECT_EQ(c.value, 0.0) << c.name;
    }
  }
}
