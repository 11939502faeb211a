#include <gtest/gtest.h>

#include <wlasso/analysis/noise.hpp>

#include "support/instances.hpp"

using namespace wlasso;

TEST(NoiseFunctionals, IdentityExample) {
  Vector y(2), b(2);
  y << 3, 0;
  b << 2, 0;
  Dataset d(Matrix::Identity(2, 2), y);
  auto f = noise_functionals(d, GlmFamily::linear(), b, {0});
  EXPECT_DOUBLE_EQ(f.z0, 0.5);
  EXPECT_DOUBLE_EQ(f.z1, 0.0);
  // full support: empty complement
  EXPECT_DOUBLE_EQ(noise_functionals(d, GlmFamily::linear(), b, {0, 1}).z1, 0.0);
  EXPECT_THROW(noise_functionals(d, GlmFamily::linear(), b, {1}), DomainError);
}

TEST(NoiseFunctionals, ExactMeanAndWeightScaling) {
  wlasso::Philox4x32 g(31, 0);
  Matrix x = testing_support::gaussian_matrix(g, 30, 5);
  Vector b = Vector::Zero(5);
  b[0] = 0.7;
  Dataset exact(x, x * b);
  auto f = noise_functionals(exact, GlmFamily::linear(), b, {0});
  EXPECT_NEAR(f.z0, 0.0, 1e-14);
  EXPECT_NEAR(f.z1, 0.0, 1e-14);

  Dataset noisy = exact.with_response(testing_support::draw_response(g, GlmFamily::linear(), x, b));
  auto base = noise_functionals(noisy, GlmFamily::linear(), b, {0});
  Vector w = Vector::Ones(5) * 2.5;
  auto scaled = noise_functionals(noisy, GlmFamily::linear(), b, {0}, w);
  EXPECT_NEAR(scaled.z1, base.z1 / 2.5, 1e-15);
  EXPECT_EQ(scaled.z0, base.z0);
}

TEST(PenaltyLevel, LogisticStandardizedExample) {
  DataSummary s;
  s.n = 100;
  s.p = 1000;
  s.column_norms = Vector::Constant(1000, 100.0);
  auto lv = penalty_level(GlmFamily::logistic(), s, 0.01, BoundedCurvature{});
  EXPECT_NEAR(lv.lambda0, std::sqrt(0.005 * std::log(200000.0)), 1e-14);
  EXPECT_NEAR(lv.lambda0, 0.24705, 1e-5);  // the literal is rounded; exact value 0.2470432
  EXPECT_EQ(lv.lambda0, lv.lambda1);
}

TEST(PenaltyLevel, MonotoneInEpsAndDimension) {
  DataSummary s;
  s.n = 100;
  s.p = 100;
  s.column_norms = Vector::Constant(100, 100.0);
  double prev = kInf;
  for (double e : {0.01, 0.1, 0.5, 0.9, 0.999}) {
    double l = penalty_level(GlmFamily::linear(), s, e, BoundedCurvature{}).lambda0;
    EXPECT_LT(l, prev);
    prev = l;
  }
  DataSummary one = s;
  one.p = 1;
  one.column_norms = Vector::Constant(1, 100.0);
  double l1 = penalty_level(GlmFamily::linear(), one, 0.05, BoundedCurvature{}).lambda0;
  double l100 = penalty_level(GlmFamily::linear(), s, 0.05, BoundedCurvature{}).lambda0;
  EXPECT_NEAR(l100 / l1, std::sqrt(std::log(200 / 0.05) / std::log(2 / 0.05)), 1e-12);
}

TEST(PenaltyLevel, GeneralColumnsSatisfyTailBound) {
  DataSummary s;
  s.n = 50;
  s.p = 4;
  s.column_norms = Vector(4);
  s.column_norms << 10, 50, 80, 120;
  const double eps = 0.05, c0 = 0.25;
  double t = penalty_level(GlmFamily::logistic(), s, eps, BoundedCurvature{}).lambda0;
  auto tail = [&](double u) {
    double a = 0;
    for (int j = 0; j < 4; ++j) a += std::exp(-50.0 * 50.0 * u * u / (2 * c0 * s.column_norms[j]));
    return a;
  };
  EXPECT_LE(tail(t), eps / 2);
  EXPECT_GT(tail(t * (1 - 1e-9)), eps / 2 * (1 - 1e-6));
}

TEST(PenaltyLevel, Errors) {
  DataSummary s;
  s.n = 10;
  s.p = 2;
  s.column_norms = Vector::Constant(2, 10.0);
  EXPECT_THROW(penalty_level(GlmFamily::poisson(), s, 0.1, BoundedCurvature{}), UnsupportedError);
  EXPECT_THROW(penalty_level(GlmFamily::linear(), s, 1.0, BoundedCurvature{}), DomainError);
  // curvature-free: huge sup-norm row makes the first display fail
  s.sigma_star_diag = Vector::Ones(2);
  s.x_inf_norms = Vector::Constant(2, 1e6);
  EXPECT_THROW(penalty_level(GlmFamily::poisson(), s, 0.1, CurvatureFree{0.5, 1.0}), InfeasibleError);
  s.n = 10000;
  s.x_inf_norms = Vector::Constant(2, 1.0);
  auto lv = penalty_level(GlmFamily::poisson(), s, 0.1, CurvatureFree{0.5, 1.0});
  EXPECT_GT(lv.lambda0, 0.0);
}

TEST(MonteCarlo, ExtremeLevels) {
  wlasso::Philox4x32 g(32, 0);
  auto d = testing_support::random_instance(g, GlmFamily::linear(), 30, 6, 2, 1.0);
  Vector b = Vector::Zero(6);
  EXPECT_EQ(monte_carlo_event_probability(d, GlmFamily::linear(), b, {0, 1}, Vector(), kInf, kInf, 50, 1), 1.0);
  EXPECT_EQ(monte_carlo_event_probability(d, GlmFamily::linear(), b, {0, 1}, Vector(), 0.0, 0.0, 50, 1), 0.0);
}

TEST(MonteCarlo, LogisticCalibratedLevelCoversTheEvent) {
  wlasso::Philox4x32 g(33, 0);
  const long n = 100, p = 50;
  Matrix x = testing_support::standardized(testing_support::gaussian_matrix(g, n, p));
  Vector b = testing_support::sparse_target(g, p, 3, 0.5, 1.0);
  Dataset d(x, testing_support::draw_response(g, GlmFamily::logistic(), x, b));
  auto lv = penalty_level(GlmFamily::logistic(), DataSummary::of(d), 0.05, BoundedCurvature{});
  double prob = monte_carlo_event_probability(d, GlmFamily::logistic(), b, {0, 1, 2}, Vector(), lv.lambda0,
                                              lv.lambda1, 1000, 77);
  EXPECT_GE(prob, 0.93);
  // reproducible from the seed
  EXPECT_EQ(prob, monte_carlo_event_probability(d, GlmFamily::logistic(), b, {0, 1, 2}, Vector(), lv.lambda0,
                                                lv.lambda1, 1000, 77));
}

TEST(EventXi, Examples) {
  EXPECT_DOUBLE_EQ(event_xi_check(1, 1, 0, 0).xi_effective, 1.0);
  auto e = event_xi_check(1, 1, 0.5, 0.5);
  EXPECT_DOUBLE_EQ(e.xi_effective, 3.0);
  EXPECT_TRUE(e.holds_for(3.0));
  EXPECT_FALSE(e.holds_for(2.999));
  EXPECT_TRUE(std::isinf(event_xi_check(1, 0.5, 0.1, 0.5).xi_effective));
  EXPECT_NEAR(event_xi_check(1, 3, 0.6, 1.2).xi_effective, event_xi_check(1, 1, 0.2, 0.4).xi_effective, 1e-15);
}

TEST(OracleBound, Examples) {
  EXPECT_DOUBLE_EQ(oracle_bound(0, 1, 1, 0.5, 1, 2, 1).lq_bound, 1.5);
  EXPECT_DOUBLE_EQ(oracle_bound(0.3, 1, 0, 0, 4, 2, 0.7).lq_bound, 0.0);
  double a = oracle_bound(0.2, 1, 0.4, 0, 4, 1, 0.5).lq_bound;
  EXPECT_NEAR(oracle_bound(0.2, 1, 0.8, 0, 4, 1, 0.5).lq_bound, 2 * a, 1e-15);
  auto ob = oracle_bound(0, 1, 1, 0.5, 2, kInf, 1, 0.5);
  EXPECT_DOUBLE_EQ(ob.lq_bound, 1.5);
  EXPECT_DOUBLE_EQ(*ob.bregman_bound, 1.5 * 1.5 * 2 / 0.5);
  EXPECT_THROW(oracle_bound(0, 1, 1, 0, 1, 2, 0.0), DomainError);
}
