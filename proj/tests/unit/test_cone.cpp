#include <gtest/gtest.h>

#include <wlasso/analysis/cone.hpp>

#include "support/instances.hpp"

using namespace wlasso;

namespace {

Matrix random_sigma(Philox4x32& g, long p, long n) {
  Matrix x = testing_support::gaussian_matrix(g, n, p);
  return x.transpose() * x / static_cast<double>(n);
}

Matrix rho2(double rho) {
  Matrix s(2, 2);
  s << 1, rho, rho, 1;
  return s;
}

// Minimum of a ratio over random points of the cone; an upper bound on the infimum.
template <class F>
double sampled_min(const ConeSpec& cone, long p, F ratio, int draws, std::uint64_t seed) {
  Philox4x32 g(seed, 0);
  std::vector<char> in(p, 0);
  for (auto j : cone.support) in[j] = 1;
  double best = kInf;
  for (int k = 0; k < draws; ++k) {
    Vector b(p);
    for (long j = 0; j < p; ++j) b[j] = g.normal();
    double s1 = 0, off = 0;
    for (long j = 0; j < p; ++j) (in[j] ? s1 : off) += std::abs(b[j]);
    // rescale the off-support part into the cone
    double scale = cone.xi * s1 / off * g.uniform();
    for (long j = 0; j < p; ++j)
      if (!in[j]) b[j] *= std::min(1.0, scale) * (g.uniform() < 0.3 ? 0.0 : 1.0);
    best = std::min(best, ratio(b));
  }
  return best;
}

double l1s(const Vector& b, const IndexSet& s) {
  double a = 0;
  for (auto j : s) a += std::abs(b[j]);
  return a;
}

FactorOptions no_closed_form() {
  FactorOptions o;
  o.closed_form_identity = false;
  return o;
}

}  // namespace

TEST(ConeFactors, IdentityIsOneEverywhere) {
  for (long p : {3L, 6L}) {
    ConeSpec cone{1.5, {0, 2}, {}};
    // closed form and the enumeration agree
    for (const FactorOptions& o : {FactorOptions{}, no_closed_form()}) {
      ConeFactors cf(Matrix::Identity(p, p), cone, o);
      EXPECT_NEAR(cf.kappa_star().value, 1.0, 1e-9);
      EXPECT_NEAR(cf.re2().value, 1.0, 1e-9);
      EXPECT_NEAR(cf.f2().value, 1.0, 1e-9);
      EXPECT_NEAR(cf.f0(Phi::support_l1()).value, 1.0, 1e-9);
      EXPECT_NEAR(cf.f0(Phi::lq(2)).value, 1.0, 1e-9);
      EXPECT_TRUE(cf.kappa_star().certified);
      EXPECT_TRUE(cf.f2().certified);
      EXPECT_TRUE(cf.f0(Phi::lq(2)).certified);
      EXPECT_GE(cf.f2().lower_bound, 1.0 - 1e-8);
    }
  }
}

TEST(ConeFactors, TwoByTwoClosedForms) {
  // S = {0}, xi = 1: b = (1, t) with |t| <= 1
  double prev = kInf;
  for (double rho : {0.0, 0.2, -0.4, 0.6, -0.8, 0.95}) {
    ConeSpec cone{1.0, {0}, {}};
    ConeFactors cf(rho2(rho), cone);
    // |S| b'Sb / |b_S|_1^2 = 1 + 2 rho t + t^2, minimized at t = -rho
    EXPECT_NEAR(cf.kappa_star().value, std::sqrt(1 - rho * rho), 1e-9);
    // the smallest eigenvector (1, -sign rho) lies on the cone boundary
    EXPECT_NEAR(cf.re2().value, std::sqrt(1 - std::abs(rho)), 1e-9);
    double f2_grid = kInf, phi1_grid = kInf;
    for (int k = -200000; k <= 200000; ++k) {
      double t = k / 200000.0, q = 1 + 2 * rho * t + t * t;
      f2_grid = std::min(f2_grid, q / std::sqrt(1 + t * t));
      phi1_grid = std::min(phi1_grid, q / (1 + std::abs(t)));
    }
    EXPECT_NEAR(cf.f2().value, f2_grid, 1e-8);
    EXPECT_TRUE(cf.f2().certified);
    EXPECT_NEAR(cf.f0(Phi::lq(1)).value, phi1_grid, 1e-8);
    if (std::abs(rho) > 0) EXPECT_LT(cf.kappa_star().value, prev);
    prev = std::abs(rho) > 0 ? cf.kappa_star().value : prev;
  }
}

TEST(ConeFactors, SingularWithNullVectorInCone) {
  // null vector (1,-1,0) has |b_Sc|_1 = 1 <= xi |b_S|_1
  Matrix s(3, 3);
  s << 1, 1, 0, 1, 1, 0, 0, 0, 1;
  ConeFactors cf(s, ConeSpec{1.0, {0}, {}});
  EXPECT_NEAR(cf.kappa_star().value, 0.0, 1e-6);
  EXPECT_NEAR(cf.re2().value, 0.0, 1e-6);
  EXPECT_NEAR(cf.f2().value, 0.0, 1e-9);
}

TEST(ConeFactors, RejectsBadInputs) {
  Matrix a(2, 2);
  a << 1, 0.5, 0.4, 1;
  EXPECT_THROW(compatibility_constant(a, ConeSpec{1.0, {0}, {}}), DomainError);
  EXPECT_THROW(compatibility_constant(Matrix::Identity(2, 2), ConeSpec{1.0, {}, {}}), DomainError);
  EXPECT_THROW(compatibility_constant(Matrix::Identity(2, 2), ConeSpec{1.0, {0}, Vector::Zero(2)}), DomainError);
  Matrix neg = Matrix::Identity(2, 2);
  neg(1, 1) = -1;
  EXPECT_THROW(compatibility_constant(neg, ConeSpec{1.0, {0}, {}}), DomainError);
}

TEST(ConeFactors, FullSupportGivesSmallestEigenvalue) {
  Philox4x32 g(51, 0);
  Matrix s = random_sigma(g, 5, 12);
  const double lam = Eigen::SelfAdjointEigenSolver<Matrix>(s).eigenvalues()[0];
  ConeFactors cf(s, ConeSpec{1.0, {0, 1, 2, 3, 4}, {}});
  EXPECT_NEAR(cf.f2().value, lam, 1e-9);
  EXPECT_NEAR(cf.re2().value, std::sqrt(lam), 1e-9);
  EXPECT_TRUE(cf.f2().certified);
}

TEST(ConeFactors, LargeXiApproachesSmallestEigenvalue) {
  Philox4x32 g(52, 0);
  Matrix s = random_sigma(g, 6, 30);
  const double lam = Eigen::SelfAdjointEigenSolver<Matrix>(s).eigenvalues()[0];
  double re = restricted_eigenvalue(s, ConeSpec{1e6, {1}, {}}).value;
  EXPECT_NEAR(re, std::sqrt(lam), 1e-6);
}

TEST(ConeFactors, MatchesSamplingOracle) {
  Philox4x32 g(53, 0);
  for (int rep = 0; rep < 3; ++rep) {
    const long p = 4;
    Matrix s = random_sigma(g, p, 6);
    ConeSpec cone{1.3, {0, 2}, {}};
    ConeFactors cf(s, cone);
    auto q = [&](const Vector& b) { return b.dot(s * b); };
    double k2 = sampled_min(cone, p, [&](const Vector& b) { return 2 * q(b) / std::pow(l1s(b, cone.support), 2); },
                            200000, 60 + rep);
    double re = sampled_min(cone, p, [&](const Vector& b) { return q(b) / b.squaredNorm(); }, 200000, 70 + rep);
    double f2 = sampled_min(
        cone, p,
        [&](const Vector& b) { return q(b) / (std::hypot(b[0], b[2]) * b.norm()); }, 200000, 80 + rep);
    double finf = sampled_min(
        cone, p, [&](const Vector& b) { return q(b) / (l1s(b, cone.support) * b.cwiseAbs().maxCoeff()); }, 200000,
        90 + rep);
    // exact values never exceed sampled ones and are close to them
    EXPECT_LE(cf.kappa_star().value * cf.kappa_star().value, k2 + 1e-12);
    EXPECT_GE(cf.kappa_star().value * cf.kappa_star().value, k2 * 0.97 - 1e-3);
    EXPECT_LE(cf.re2().value * cf.re2().value, re + 1e-12);
    EXPECT_GE(cf.re2().value * cf.re2().value, re * 0.97 - 1e-3);
    EXPECT_LE(cf.f2().lower_bound, f2 + 1e-12);
    EXPECT_GE(cf.f2().value, f2 * 0.97 - 1e-3);
    EXPECT_LE(cf.f0(Phi::lq(kInf)).value, finf + 1e-12);
    EXPECT_GE(cf.f0(Phi::lq(kInf)).value, finf * 0.97 - 1e-3);
  }
}

TEST(ConeFactorProperties, OrderingChainAndIdentity) {
  Philox4x32 g(54, 0);
  for (int rep = 0; rep < 6; ++rep) {
    const long p = 4 + rep % 4;
    Matrix s = random_sigma(g, p, 3 + 2 * rep);
    Vector w = Vector::Ones(p);
    for (long j = 0; j < p; ++j) w[j] = 0.5 + g.uniform();
    ConeSpec cone{0.5 + 2 * g.uniform(), {0, 1}, w};
    ConeFactors cf(s, cone);
    const double k = cf.kappa_star().value, re = cf.re2().value;
    EXPECT_LE(re, k + 1e-9);
    EXPECT_LE(re * re, cf.f2().value + 1e-9);
    EXPECT_LE(re * re, cf.f2().lower_bound + 1e-9);
    EXPECT_NEAR(cf.f0(Phi::support_l1()).value, k * k, 1e-8);
    auto f02 = cf.f0(Phi::lq(2));
    EXPECT_GE(f02.lower_bound, k * re - 1e-9);
    EXPECT_LE(f02.lower_bound, f02.value + 1e-12);
  }
}

TEST(ConeFactorProperties, ScaleEquivariance) {
  Philox4x32 g(55, 0);
  Matrix s = random_sigma(g, 5, 8);
  ConeSpec cone{1.2, {3}, {}};
  ConeFactors a(s, cone), b(3.5 * s, cone);
  EXPECT_NEAR(b.kappa_star().value, std::sqrt(3.5) * a.kappa_star().value, 1e-8);
  EXPECT_NEAR(b.re2().value, std::sqrt(3.5) * a.re2().value, 1e-8);
  EXPECT_NEAR(b.f2().value, 3.5 * a.f2().value, 1e-8);
  EXPECT_NEAR(b.f0(Phi::lq(1)).value, 3.5 * a.f0(Phi::lq(1)).value, 1e-8);
  EXPECT_NEAR(b.f0(Phi::lq(2)).value, 3.5 * a.f0(Phi::lq(2)).value, 1e-7);
}

TEST(ConeFactorProperties, NonincreasingInXi) {
  Philox4x32 g(56, 0);
  Matrix s = random_sigma(g, 6, 10);
  double pk = kInf, pr = kInf, pf = kInf, p1 = kInf;
  for (double xi : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    ConeFactors cf(s, ConeSpec{xi, {0, 4}, {}});
    EXPECT_LE(cf.kappa_star().value, pk + 1e-10);
    EXPECT_LE(cf.re2().value, pr + 1e-10);
    EXPECT_LE(cf.f2().lower_bound, pf + 1e-8);
    EXPECT_LE(cf.f0(Phi::lq(1)).value, p1 + 1e-10);
    pk = cf.kappa_star().value;
    pr = cf.re2().value;
    pf = cf.f2().value;
    p1 = cf.f0(Phi::lq(1)).value;
  }
}

TEST(ConeFactorProperties, SearchNeverBeatsEnumeration) {
  Philox4x32 g(57, 0);
  for (int rep = 0; rep < 4; ++rep) {
    const long p = 5 + rep;
    Matrix s = random_sigma(g, p, p + 2);
    ConeSpec cone{1.0 + rep, {0, 2}, {}};
    FactorOptions search;
    search.enumeration_cap = 0;
    ConeFactors exact(s, cone), approx(s, cone, search);
    EXPECT_GE(approx.kappa_star().value, exact.kappa_star().value - 1e-6);
    EXPECT_GE(approx.re2().value, exact.re2().value - 1e-6);
    EXPECT_GE(approx.f2().value, exact.f2().lower_bound - 1e-6);
    EXPECT_GE(approx.f0(Phi::lq(1)).value, exact.f0(Phi::lq(1)).value - 1e-6);
    EXPECT_FALSE(approx.kappa_star().method == FactorMethod::exact_enumeration);
    // search finds the optimum on these small problems
    EXPECT_NEAR(approx.kappa_star().value, exact.kappa_star().value, 1e-4);
  }
}

TEST(ConeFactorProperties, ReportCollectsFactors) {
  Philox4x32 g(58, 0);
  Matrix s = random_sigma(g, 5, 20);
  auto r = invertibility_report(s, ConeSpec{1.0, {0, 1}, {}}, {Phi::lq(1), Phi::lq(2), Phi::lq(kInf), Phi::support_l1()});
  EXPECT_EQ(r.f0_by_phi.size(), 4u);
  EXPECT_EQ(r.method, FactorMethod::exact_enumeration);
  EXPECT_GE(r.kappa_star.value, r.re2.value - 1e-12);
  // phi_inf <= phi_2 <= phi_1 pointwise (|b|_inf <= |b|_2/|S|^{1/2}... not pointwise), so only check positivity
  for (auto& [phi, v] : r.f0_by_phi) EXPECT_GT(v.value, 0.0);
}

#include <wlasso/analysis/glm_gif.hpp>

namespace {

struct GlmOracle {
  const Dataset& d;
  GlmFamily f;
  Vector beta;
  IndexSet s;
  double m2;
  Vector curv() const {
    Vector t = d.x() * beta, c(t.size());
    for (long i = 0; i < t.size(); ++i) {
      double mu = 1 / (1 + std::exp(-t[i]));
      c[i] = f.kind == FamilyKind::logistic ? mu * (1 - mu) : std::exp(t[i]);
    }
    return c;
  }
  double f_star(Vector b) const {
    b.normalize();
    Vector u = d.x() * b, c = curv();
    double num = 0;
    for (long i = 0; i < u.size(); ++i) num += c[i] * std::min(std::abs(u[i]) * m2 / f.m1, u[i] * u[i]);
    return num / (d.n() * l1s(b, s) * m2);
  }
  double f_lower(const Vector& b) const {
    Vector u = d.x() * b, c = curv();
    double a = 0, cube = 0;
    for (long i = 0; i < u.size(); ++i) {
      a += c[i] * u[i] * u[i];
      cube += c[i] * std::pow(std::abs(u[i]), 3);
    }
    a /= d.n();
    return d.n() * a * a / (f.m1 * l1s(b, s) * cube);
  }
};

}  // namespace

TEST(GlmGif, LinearReducesToSimpleGif) {
  Philox4x32 g(61, 0);
  auto d = testing_support::random_instance(g, GlmFamily::linear(), 20, 5, 2, 1.0);
  ConeSpec cone{1.0, {0, 1}, {}};
  auto r = glm_gif_lower_bounds(d, GlmFamily::linear(), Vector::Zero(5), cone, 2.0);
  Matrix sigma = d.x().transpose() * d.x() / 20.0;
  EXPECT_NEAR(r.f_star.value, simple_gif(sigma, cone, Phi::lq(2)).value / (2.0 * std::sqrt(2.0)), 1e-10);
  EXPECT_TRUE(std::isinf(r.f_lower.value));
  EXPECT_EQ(r.m3, 0.0);
  EXPECT_THROW(glm_gif_lower_bounds(d, GlmFamily::linear(), Vector::Zero(5), cone, 0.0), DomainError);
}

TEST(GlmGif, SmallLogisticAgreesWithSamplingOracle) {
  Philox4x32 g(62, 0);
  const long n = 20, p = 4;
  Matrix x = testing_support::standardized(testing_support::gaussian_matrix(g, n, p));
  Vector beta = Vector::Zero(p);
  beta[0] = 0.8;
  Dataset d(x, testing_support::draw_response(g, GlmFamily::logistic(), x, beta));
  ConeSpec cone{1.0, {0, 1}, {}};
  const double m2 = 1.0;
  auto r = glm_gif_lower_bounds(d, GlmFamily::logistic(), beta, cone, m2);
  GlmOracle o{d, GlmFamily::logistic(), beta, cone.support, m2};
  double fs = sampled_min(cone, p, [&](const Vector& b) { return o.f_star(b); }, 400000, 63);
  double fl = sampled_min(cone, p, [&](const Vector& b) { return o.f_lower(b); }, 400000, 64);
  EXPECT_GE(r.f_star.value, fs - 1e-3);
  EXPECT_LE(r.f_star.value, fs + 1e-3);
  EXPECT_GE(r.f_lower.value, fl - 1e-3);
  EXPECT_LE(r.f_lower.value, fl + 1e-3);
  // reported values are attained at the reported points
  EXPECT_NEAR(o.f_star(r.f_star.argmin), r.f_star.value, 1e-10);
  EXPECT_NEAR(o.f_lower(r.f_lower.argmin), r.f_lower.value, 1e-10);
  EXPECT_FALSE(r.f_star.certified);
}

TEST(GlmGif, LogisticAtZeroScalesWithConstantCurvature) {
  Philox4x32 g(65, 0);
  Matrix x = testing_support::standardized(testing_support::gaussian_matrix(g, 30, 4));
  Dataset d(x, Vector::Zero(30));
  ConeSpec cone{1.0, {2}, {}};
  auto r = glm_gif_lower_bounds(d, GlmFamily::logistic(), Vector::Zero(4), cone, 1.0);
  // with psi_ddot = 1/4: F- = (1/4) n (b'X'Xb/n)^2 / (|b_S|_1 sum|u|^3) at the minimizer
  const Vector& b = r.f_lower.argmin;
  Vector u = x * b;
  double a = u.squaredNorm() / 30.0, cube = u.array().abs().cube().sum();
  EXPECT_NEAR(r.f_lower.value, 0.25 * 30.0 * a * a / (std::abs(b[2]) * cube), 1e-10);
}

TEST(GlmGif, CompatibilityBoundBelowBothFactors) {
  Philox4x32 g(66, 0);
  for (int rep = 0; rep < 3; ++rep) {
    const long n = 40, p = 5;
    Matrix x = testing_support::standardized(testing_support::gaussian_matrix(g, n, p));
    Vector beta = Vector::Zero(p);
    beta[0] = 0.5;
    Dataset d(x, testing_support::draw_response(g, GlmFamily::logistic(), x, beta));
    ConeSpec cone{1.0, {0, 1}, {}};
    const GlmFamily fam = GlmFamily::logistic();
    // M2 = M1 <= M3/(1+xi)
    auto r = glm_gif_lower_bounds(d, fam, beta, cone, fam.m1);
    ASSERT_LE(fam.m1, r.m3 / (1 + cone.xi));
    double k = compatibility_constant(sigma_star_matrix(d, fam, beta), cone).value;
    EXPECT_LE(k * k / (r.m3 * 2.0), std::min(r.f_lower.value, r.f_star.value) + 1e-6);
  }
}
