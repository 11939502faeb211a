#pragma once

#include <wlasso/analysis/noise.hpp>
#include <wlasso/common.hpp>
#include <wlasso/glm.hpp>
#include <wlasso/rng.hpp>

#include <Eigen/LU>

#include <cmath>
#include <optional>
#include <sstream>
#include <string>

namespace wlasso {

struct SelectionMode {
  bool sampled = false;  // false: evaluate at beta* only
  int count = 512;
  std::uint64_t seed = 0;

  static SelectionMode at_target_only() { return {}; }
  static SelectionMode sampled_ball(int count, std::uint64_t seed) { return {true, count, seed}; }
  std::string label() const { return sampled ? "sampled_ball(" + std::to_string(count) + ")" : "at_target_only"; }
};

struct SelectionReport {
  double kappa0 = 0.0;
  double kappa1 = 0.0;
  double m0 = 0.0;
  double eta_ball = 0.0;
  double ball_radius = 0.0;  // eta / M2 in the l2 norm
  SelectionMode evaluation_mode;
  bool exact_suprema = false;  // constant Hessian: the suprema are attained at beta*
  int points_evaluated = 0;
  std::optional<bool> predicted_no_false_positive;
  std::optional<bool> predicted_sign_recovery;
  std::optional<double> beta_min_threshold;  // M0 (|w_S|_inf lambda + z0)
  double beta_min = 0.0;                     // min_{j in S} |beta*_j|
};

// Default M2 = M1 max_i |x^i|_2 / sqrt(n).
inline double default_m2(const Dataset& data, const GlmFamily& family) {
  return family.m1 * data.x().rowwise().norm().maxCoeff() / std::sqrt(static_cast<double>(data.n()));
}

namespace detail {

inline Matrix hessian_at(const Dataset& data, const GlmFamily& family, const Vector& beta) {
  const Vector theta = data.x() * beta;
  check_predictor(family, theta);
  Vector curv(theta.size());
  for (Index i = 0; i < theta.size(); ++i) curv[i] = family.psi0_ddot(theta[i]);
  return data.x().transpose() * curv.asDiagonal() * data.x() / static_cast<double>(data.n());
}

inline double inf_norm(const Matrix& m) { return m.rows() ? m.cwiseAbs().rowwise().sum().maxCoeff() : 0.0; }

struct IrrepresentableValues {
  double kappa0 = 0.0, kappa1 = 0.0, m0 = 0.0;
};

inline IrrepresentableValues irrepresentable_at(const Matrix& h, const IndexSet& s, const IndexSet& sc, const Vector& w,
                                                const Vector& beta) {
  const Matrix hs = gather(h, s, s);
  Eigen::FullPivLU<Matrix> lu(hs);
  if (!lu.isInvertible()) {
    std::ostringstream msg;
    msg << "Hessian block on S is singular at beta = [" << beta.transpose() << "]";
    throw SingularError(msg.str());
  }
  const Matrix inv = lu.inverse();
  Matrix left = gather(h, sc, s) * inv;
  for (std::size_t r = 0; r < sc.size(); ++r) left.row(static_cast<Index>(r)) /= w[sc[r]];
  Matrix with_ws = left;
  for (std::size_t c = 0; c < s.size(); ++c) with_ws.col(static_cast<Index>(c)) *= w[s[c]];
  return {inf_norm(with_ws), inf_norm(left), inf_norm(inv)};
}

}  // namespace detail

/**
 * Irrepresentable quantities over the ball {beta : M2 |beta - beta*|_2 <= eta}.
 * kappa0 and kappa1 are taken over the whole ball, M0 over its sign-consistent part.
 * Sampled suprema are lower bounds on the true suprema.
 */
inline SelectionReport irrepresentable_check(const Dataset& data, const GlmFamily& family, const Vector& beta_star,
                                             const IndexSet& support, const Vector& w_bound, double eta_ball,
                                             const SelectionMode& mode, std::optional<double> m2 = std::nullopt) {
  if (beta_star.size() != data.p()) throw DomainError("beta_star length does not match p");
  if (support.empty()) throw DomainError("support must be nonempty");
  if (!(eta_ball >= 0.0)) throw DomainError("eta must be nonnegative");
  const Index p = data.p();
  const Vector w = detail::resolve_bound(w_bound, p);
  const IndexSet sc = complement(support, p);
  for (Index j : sc)
    if (!(w[j] > 0.0)) throw DomainError("w_bound must be positive off the support");
  for (Index j : sc)
    if (beta_star[j] != 0.0) throw DomainError("support must contain every nonzero of beta_star");

  SelectionReport rep;
  rep.eta_ball = eta_ball;
  rep.evaluation_mode = mode;
  rep.beta_min = kInf;
  for (Index j : support) rep.beta_min = std::min(rep.beta_min, std::abs(beta_star[j]));
  const double m2v = m2 ? *m2 : default_m2(data, family);
  rep.ball_radius = m2v > 0.0 ? eta_ball / m2v : kInf;
  rep.exact_suprema = family.m1 == 0.0;

  auto absorb = [&](const Vector& beta, bool signed_point) {
    auto v = detail::irrepresentable_at(detail::hessian_at(data, family, beta), support, sc, w, beta);
    rep.kappa0 = std::max(rep.kappa0, v.kappa0);
    rep.kappa1 = std::max(rep.kappa1, v.kappa1);
    if (signed_point) rep.m0 = std::max(rep.m0, v.m0);
    ++rep.points_evaluated;
  };
  absorb(beta_star, true);
  if (!mode.sampled || rep.exact_suprema || !(rep.ball_radius > 0.0)) return rep;
  if (mode.count < 1) throw DomainError("sample count must be positive");

  Philox4x32 rng(mode.seed, kSearchStream);
  const double dim = static_cast<double>(p), dim_s = static_cast<double>(support.size());
  for (int k = 0; k < mode.count; ++k) {
    // uniform point in the full ball
    Vector dir(p);
    for (Index j = 0; j < p; ++j) dir[j] = rng.normal();
    Vector beta = beta_star + dir.normalized() * rep.ball_radius * std::pow(rng.uniform(), 1.0 / dim);
    absorb(beta, false);
    // uniform point in the ball restricted to S, kept when the signs match beta*
    Vector ds = Vector::Zero(p);
    for (Index j : support) ds[j] = rng.normal();
    Vector signed_beta = beta_star + ds.normalized() * rep.ball_radius * std::pow(rng.uniform(), 1.0 / dim_s);
    bool consistent = true;
    for (Index j : support) consistent = consistent && sign(signed_beta[j]) == sign(beta_star[j]);
    if (consistent) absorb(signed_beta, true);
  }
  return rep;
}

/**
 * Fills the no-false-positive and sign-recovery predictions for given event quantities.
 * factor stands in for F(0,S;phi0,phi0); pass +inf for the linear family.
 */
inline void selection_predictions(SelectionReport& rep, double lambda, double z0, double z1, double w_s_inf,
                                  double factor) {
  const double eta = rep.eta_ball;
  const double lead = w_s_inf * lambda + z0;
  const bool ball_ok = std::isinf(factor) ? true : lead <= eta * std::exp(-eta) * factor;
  const bool outside_ok = rep.kappa1 * z0 + z1 <= (1.0 - rep.kappa0) * lambda;
  rep.predicted_no_false_positive = rep.kappa0 < 1.0 && ball_ok && outside_ok;
  rep.beta_min_threshold = rep.m0 * lead;
  rep.predicted_sign_recovery = *rep.predicted_no_false_positive && *rep.beta_min_threshold < rep.beta_min;
}

}  // namespace wlasso
