#pragma once

#include <wlasso/analysis/cone.hpp>
#include <wlasso/glm.hpp>

#include <cmath>

namespace wlasso {

struct GlmGifBounds {
  FactorValue f_star;   // F*(xi,S; M2|.|_2)
  FactorValue f_lower;  // F_-(xi,S)
  double m3 = 0.0;      // M1 (|X_S|_inf + xi |X_Sc W^-1|_inf)
};

// Sigma* = X' diag(psi_ddot(X beta*)) X / n
inline Matrix sigma_star_matrix(const Dataset& data, const GlmFamily& family, const Vector& beta_star) {
  const Vector theta = data.x() * beta_star;
  detail::check_predictor(family, theta);
  Vector curv(theta.size());
  for (Index i = 0; i < theta.size(); ++i) curv[i] = family.psi0_ddot(theta[i]);
  return data.x().transpose() * curv.asDiagonal() * data.x() / static_cast<double>(data.n());
}

inline double m3_constant(const Dataset& data, const GlmFamily& family, const ConeSpec& cone) {
  const auto g = cone_detail::make_geometry(Matrix::Identity(data.p(), data.p()), cone);
  double on = 0.0, off = 0.0;
  for (Index j : g.s) on = std::max(on, data.x().col(j).cwiseAbs().maxCoeff());
  for (Index j : g.sc) off = std::max(off, data.x().col(j).cwiseAbs().maxCoeff() / g.w[j]);
  return family.m1 * (on + g.xi * off);
}

/**
 * Computable lower-bound factors for GLM. Both infima come from multistart search and are
 * upper estimates of the true infimum; the linear family reduces to F0(phi_2)/(M2 sqrt|S|).
 */
inline GlmGifBounds glm_gif_lower_bounds(const Dataset& data, const GlmFamily& family, const Vector& beta_star,
                                         const ConeSpec& cone, double m2, const FactorOptions& opts = {}) {
  if (!(m2 > 0.0) || !std::isfinite(m2)) throw DomainError("M2 must be positive");
  if (beta_star.size() != data.p()) throw DomainError("beta_star length does not match p");
  GlmGifBounds out;
  out.m3 = m3_constant(data, family, cone);
  const Matrix& x = data.x();
  const double n = static_cast<double>(data.n());
  const Vector theta = x * beta_star;
  detail::check_predictor(family, theta);
  Vector curv(theta.size());
  for (Index i = 0; i < theta.size(); ++i) curv[i] = family.psi0_ddot(theta[i]);
  const Matrix sigma_star = x.transpose() * curv.asDiagonal() * x / n;
  const auto g = cone_detail::make_geometry(sigma_star, cone);
  const double s_root = std::sqrt(g.s_size());

  if (family.m1 == 0.0) {
    FactorValue f = ConeFactors(sigma_star, cone, opts).f0(Phi::lq(2.0));
    const double scale = m2 * s_root;
    out.f_star = FactorValue{f.value / scale, f.lower_bound / scale, f.certified, f.method, f.argmin};
    out.f_lower = FactorValue{kInf, kInf, true, FactorMethod::closed_form, Vector()};
    return out;
  }

  const double m1 = family.m1;
  auto support_terms = [&g](const Vector& b, double& s1) {
    Vector sgn = Vector::Zero(g.p);
    s1 = 0.0;
    for (Index j : g.s) {
      s1 += std::abs(b[j]);
      sgn[j] = sign(b[j]);
    }
    return sgn;
  };

  // F*: sum_i psi_ddot_i min(|u_i| M2/M1, u_i^2) / (n |b_S|_1 M2) at |b|_2 = 1
  cone_detail::LogObjective f_star = [&, m1, m2](const Vector& bin, Vector* grad) {
    const Vector b = bin / bin.norm();
    const Vector u = x * b;
    double num = 0.0;
    Vector du(u.size());
    for (Index i = 0; i < u.size(); ++i) {
      const double lin = std::abs(u[i]) * m2 / m1, quad = u[i] * u[i];
      if (lin < quad) {
        num += curv[i] * lin;
        du[i] = curv[i] * sign(u[i]) * m2 / m1;
      } else {
        num += curv[i] * quad;
        du[i] = curv[i] * 2.0 * u[i];
      }
    }
    double s1 = 0.0;
    const Vector sgn = support_terms(b, s1);
    if (!(s1 > 0.0)) return kInf;
    if (grad) *grad = (num > 0.0 ? Vector(x.transpose() * du / num) : Vector(Vector::Zero(g.p))) - sgn / s1;
    return num > 0.0 ? std::log(num / (n * s1 * m2)) : -kInf;
  };

  // F-: n <b, Sigma* b>^2 / (M1 |b_S|_1 sum_i psi_ddot_i |u_i|^3)
  cone_detail::LogObjective f_lower = [&, m1](const Vector& b, Vector* grad) {
    const Vector u = x * b;
    const Vector sb = sigma_star * b;
    const double a = b.dot(sb);
    double cube = 0.0;
    Vector dc(u.size());
    for (Index i = 0; i < u.size(); ++i) {
      cube += curv[i] * std::pow(std::abs(u[i]), 3);
      dc[i] = curv[i] * 3.0 * u[i] * std::abs(u[i]);
    }
    double s1 = 0.0;
    const Vector sign_s = support_terms(b, s1);
    if (!(s1 > 0.0) || !(cube > 0.0)) return kInf;
    if (!(a > 0.0)) {
      if (grad) *grad = Vector::Zero(g.p);
      return -kInf;
    }
    if (grad) *grad = 4.0 * sb / a - sign_s / s1 - x.transpose() * dc / cube;
    return std::log(n * a * a / (m1 * s1 * cube));
  };

  auto seeds = cone_detail::default_seeds(sigma_star, g);
  auto run = [&](const cone_detail::LogObjective& f) {
    auto s = cone_detail::multistart(g, f, seeds, opts);
    FactorValue v;
    v.value = std::exp(s.log_value);
    v.lower_bound = 0.0;
    v.certified = false;
    v.method = FactorMethod::multistart_search;
    v.argmin = s.argmin;
    return v;
  };
  out.f_star = run(f_star);
  out.f_lower = run(f_lower);
  return out;
}

}  // namespace wlasso
