#include <cmath>

#include <gtest/gtest.h>

#include "gmmdiff/gmm.hpp"
#include "gmmdiff/suite.hpp"
#include "gmmdiff/verify.hpp"
#include "test_helpers.hpp"

using namespace gmmdiff;
using namespace gmmdiff::testing;

namespace {

Errc code_of(const RawMixture& raw) {
  try {
    validate_spec(raw);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected validate_spec to throw";
  return Errc::InvalidArgument;
}

GmmSpec generic_2d() {
  return make_spec(2, {0.2, 0.5, 0.3}, {vec({0, 0}), vec({1.5, -0.5}), vec({-1, 2})},
                   {mat(2, {1, 0.3, 0.3, 0.5}), mat(2, {0.8, -0.2, -0.2, 1.2}), mat(2, {2, 0.5, 0.5, 1})});
}

}  // namespace

TEST(ValidateSpec, AcceptsSingleStandardNormal) {
  const auto s = make_spec(1, {1.0}, {vec({0})}, {mat(1, {1})});
  EXPECT_EQ(s.size(), 1u);
  EXPECT_EQ(s.dim(), 1);
}

TEST(ValidateSpec, RejectsWeightsThatDoNotSumToOne) {
  RawMixture raw{1, {{0.6, vec({0}), mat(1, {1})}, {0.6, vec({1}), mat(1, {1})}}};
  EXPECT_EQ(code_of(raw), Errc::WeightsDoNotSumToOne);
}

TEST(ValidateSpec, RejectsIndefiniteCovariance) {
  // Eigenvalues 3 and -1.
  RawMixture raw{2, {{1.0, vec({0, 0}), mat(2, {1, 2, 2, 1})}}};
  EXPECT_EQ(code_of(raw), Errc::NotPositiveDefinite);
}

TEST(ValidateSpec, RejectsSingularCovariance) {
  RawMixture raw{2, {{1.0, vec({0, 0}), mat(2, {1, 1, 1, 1})}}};
  EXPECT_EQ(code_of(raw), Errc::NotPositiveDefinite);
}

TEST(ValidateSpec, RejectsAsymmetricCovariance) {
  RawMixture raw{2, {{1.0, vec({0, 0}), mat(2, {1, 0.1, 0.0, 1})}}};
  EXPECT_EQ(code_of(raw), Errc::NonSymmetricCovariance);
}

TEST(ValidateSpec, ToleratesTinyAsymmetryAndSymmetrizes) {
  const auto s = make_spec(2, {1.0}, {vec({0, 0})}, {mat(2, {1, 0.1 + 1e-12, 0.1, 1})});
  EXPECT_EQ(s[0].covariance()(0, 1), s[0].covariance()(1, 0));
}

TEST(ValidateSpec, RejectsDimensionMismatchAndEmpty) {
  RawMixture mixed{2, {{0.5, vec({0, 0}), mat(2, {1, 0, 0, 1})}, {0.5, vec({0}), mat(1, {1})}}};
  EXPECT_EQ(code_of(mixed), Errc::DimensionMismatch);
  EXPECT_EQ(code_of(RawMixture{1, {}}), Errc::EmptyMixture);
}

TEST(ValidateSpec, ErrorNamesOffendingComponent) {
  RawMixture raw{2, {{0.5, vec({0, 0}), mat(2, {1, 0, 0, 1})}, {0.5, vec({0, 0}), mat(2, {1, 2, 2, 1})}}};
  try {
    validate_spec(raw);
    FAIL();
  } catch (const Error& e) {
    ASSERT_TRUE(e.index().has_value());
    EXPECT_EQ(*e.index(), 1);
    EXPECT_NE(std::string(e.what()).find("component 1"), std::string::npos);
  }
}

TEST(ValidateSpec, CachedCholeskyReproducesCovariance) {
  const auto s = generic_2d();
  for (const auto& c : s.components()) {
    const Matrix rebuilt = c.cholesky() * c.cholesky().transpose();
    EXPECT_LE((rebuilt - c.covariance()).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Density, StandardNormalAtOrigin) {
  const auto s = standard_normal(1);
  EXPECT_NEAR(density(s, vec({0})), 0.3989422804014327, 1e-15);
  EXPECT_NEAR(log_density(s, vec({0})), -0.9189385332046727, 1e-15);
}

TEST(Density, FarComponentIsNegligible) {
  const auto s = pair_1d(0, 1, 10, 1);
  EXPECT_NEAR(density(s, vec({0})), 0.19947114020071635, 1e-15);
}

TEST(Density, MatchesNaiveOracleAndHighPrecisionValue) {
  const auto s = generic_2d();
  const Vector x = vec({0.7, 0.4});
  // 50-digit reference evaluation.
  EXPECT_NEAR(density(s, x), 0.083858649767426172085, 1e-15);
  EXPECT_NEAR(log_density(s, x), -2.4786226384015048805, 1e-13);
  ChainRng rng(5, 0, 0);
  for (int i = 0; i < 50; ++i) {
    const Vector y = vec({3 * rng.normal(), 3 * rng.normal()});
    EXPECT_NEAR(density(s, y), naive_density(s, y), 1e-13 * std::max(1.0, naive_density(s, y)));
  }
}

TEST(LogDensity, LogSumExpSurvivesUnderflow) {
  // x sits 60σ from the nearer component; exp() of either term underflows.
  const auto s = make_spec(1, {0.3, 0.7}, {vec({0}), vec({12})}, {mat(1, {0.04}), mat(1, {0.09})});
  EXPECT_EQ(density(s, vec({-12})), 0.0);
  EXPECT_NEAR(log_density(s, vec({-12})), -1800.5134734250965084, 1e-9);
}

TEST(LogDensity, ConsistentWithDensity) {
  const auto s = generic_2d();
  for (double a : {-2.0, 0.0, 1.0, 3.0}) {
    const Vector x = vec({a, 0.5 * a});
    EXPECT_NEAR(log_density(s, x), std::log(density(s, x)), 1e-12);
  }
}

TEST(LogDensity, DimensionMismatchThrows) {
  const auto s = generic_2d();
  EXPECT_THROW(log_density(s, vec({1})), Error);
  EXPECT_THROW(score(s, vec({1, 2, 3})), Error);
}

TEST(Responsibilities, SingleComponentIsOne) {
  EXPECT_EQ(responsibilities(gaussian_1d(1, 2), vec({5})).values(0), 1.0);
}

TEST(Responsibilities, SymmetricPointSplitsEvenly) {
  const auto f = responsibilities(pair_1d(-1, 1, 1, 1), vec({0})).values;
  EXPECT_DOUBLE_EQ(f(0), 0.5);
  EXPECT_DOUBLE_EQ(f(1), 0.5);
}

TEST(Responsibilities, MatchHighPrecisionRatios) {
  const auto f = responsibilities(generic_2d(), vec({0.7, 0.4})).values;
  EXPECT_NEAR(f(0), 0.44400579224242781874, 1e-14);
  EXPECT_NEAR(f(1), 0.53592862860815340152, 1e-14);
  EXPECT_NEAR(f(2), 0.020065579149418779743, 1e-14);
  EXPECT_NEAR(f.sum(), 1.0, 1e-12);
}

TEST(Score, ClosedFormCases) {
  const auto s = standard_normal(2);
  const Vector g = score(s, vec({1, 2}));
  EXPECT_EQ(g(0), -1.0);
  EXPECT_EQ(g(1), -2.0);
  EXPECT_EQ(score(gaussian_1d(0, 4), vec({2}))(0), -0.5);
  EXPECT_NEAR(score(pair_1d(-1, 1, 1, 1), vec({0}))(0), 0.0, 1e-12);
}

TEST(Score, MatchesHighPrecisionValue) {
  const Vector g = score(generic_2d(), vec({0.7, 0.4}));
  EXPECT_NEAR(g(0), 0.17663273897179233537, 1e-13);
  EXPECT_NEAR(g(1), -0.48553872470582277446, 1e-13);
}

TEST(Score, SingleGaussianIsExact) {
  const auto s = make_spec(2, {1.0}, {vec({1, -1})}, {mat(2, {2, 0.5, 0.5, 1})});
  const Vector x = vec({0.3, 2.0});
  const Vector expected = -s[0].precision() * (x - s[0].mean());
  EXPECT_LE((score(s, x) - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(score_jacobian(s, x), -s[0].precision());
}

TEST(ScoreJacobian, ClosedFormCases) {
  EXPECT_EQ(score_jacobian(standard_normal(3), vec({1, 2, 3})), -Matrix::Identity(3, 3));
  const auto s = make_spec(2, {1.0}, {vec({0, 0})}, {mat(2, {4, 0, 0, 1})});
  const Matrix J = score_jacobian(s, vec({5, -7}));
  EXPECT_EQ(J(0, 0), -0.25);
  EXPECT_EQ(J(1, 1), -1.0);
  EXPECT_EQ(J(0, 1), 0.0);
}

TEST(ScoreJacobian, IsSymmetric) {
  const Matrix J = score_jacobian(generic_2d(), vec({0.1, -0.3}));
  EXPECT_EQ(J(0, 1), J(1, 0));
}

TEST(GradientCheck, RandomSweep) {
  // 200 random (spec, point) pairs, d ∈ {1, 2, 5}, k ∈ {1, 3, 8}.
  ChainRng rng(11, 0, 0);
  const int dims[] = {1, 2, 5};
  const int ks[] = {1, 3, 8};
  double worst_grad = 0.0, worst_hess = 0.0;
  for (int i = 0; i < 200; ++i) {
    const int d = dims[i % 3];
    const int k = ks[(i / 3) % 3];
    const auto s = random_spec(d, k, rng);
    const Vector x = sample(s, 1, 1000 + static_cast<std::uint64_t>(i)).point(0);
    worst_grad = std::max(worst_grad, relative_error(score(s, x), fd_score(s, x)));
    worst_hess = std::max(worst_hess, relative_error(score_jacobian(s, x), fd_jacobian(s, x)));
    EXPECT_NEAR(responsibilities(s, x).values.sum(), 1.0, 1e-12);
  }
  EXPECT_LE(worst_grad, 1e-5);
  EXPECT_LE(worst_hess, 1e-4);
}

TEST(Sample, StandardNormalMeansAreCentered) {
  const auto b = sample(standard_normal(2), 100000, 3);
  const Vector m = b.points.rowwise().mean();
  EXPECT_LE(m.cwiseAbs().maxCoeff(), 4.0 / std::sqrt(1e5));
}

TEST(Sample, DeterministicAndThreadIndependent) {
  const auto s = generic_2d();
  const auto a = sample(s, 5000, 9, 1);
  const auto b = sample(s, 5000, 9, 1);
  const auto c = sample(s, 5000, 9, 4);
  EXPECT_EQ(a.points, b.points);
  EXPECT_EQ(a.points, c.points);
  EXPECT_NE(a.points, sample(s, 5000, 10).points);
}

TEST(Sample, ComponentFrequenciesMatchWeights) {
  // Components far apart, so each draw is attributable to its component.
  const auto s = make_spec(1, {0.2, 0.5, 0.3}, {vec({-100}), vec({0}), vec({100})},
                           {mat(1, {1}), mat(1, {1}), mat(1, {1})});
  const std::size_t n = 100000;
  const auto b = sample(s, n, 21);
  const double counts[] = {static_cast<double>((b.points.array() < -50).count()),
                           static_cast<double>((b.points.array().abs() < 50).count()),
                           static_cast<double>((b.points.array() > 50).count())};
  for (int i = 0; i < 3; ++i) {
    const double w = s[static_cast<std::size_t>(i)].weight();
    const double se = std::sqrt(w * (1 - w) / n);
    EXPECT_NEAR(counts[i] / n, w, 4 * se) << "component " << i;
  }
}

TEST(Mixture, AnalyticMomentsOfSymmetricPair) {
  const auto s = standard_mixture();
  EXPECT_NEAR(mixture_mean(s)(0), 0.0, 1e-15);
  EXPECT_NEAR(mixture_covariance(s)(0, 0), 4.25, 1e-14);
}
