#pragma once

#include <wlasso/common.hpp>
#include <wlasso/glm.hpp>
#include <wlasso/rng.hpp>
#include <wlasso/simulate.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <variant>

namespace wlasso {

struct NoiseFunctionals {
  double z0 = 0.0;  // max over S of |score_j|
  double z1 = 0.0;  // max over S^c of |score_j| / w_j
};

namespace detail {
inline Vector resolve_bound(const Vector& w, Index p) {
  if (w.size() == 0) return Vector::Ones(p);
  if (w.size() != p) throw DomainError("w_bound length does not match p");
  return w;
}
inline NoiseFunctionals functionals_of_score(const Vector& sc, const IndexSet& support, const Vector& w) {
  NoiseFunctionals out;
  std::vector<char> in(static_cast<std::size_t>(sc.size()), 0);
  for (Index j : support) {
    in[static_cast<std::size_t>(j)] = 1;
    out.z0 = std::max(out.z0, std::abs(sc[j]));
  }
  for (Index j = 0; j < sc.size(); ++j) {
    if (in[static_cast<std::size_t>(j)]) continue;
    if (!(w[j] > 0.0)) throw DomainError("w_bound must be positive off the support");
    out.z1 = std::max(out.z1, std::abs(sc[j]) / w[j]);
  }
  return out;
}
}  // namespace detail

inline NoiseFunctionals noise_functionals(const Dataset& data, const GlmFamily& family, const Vector& beta_star,
                                          const IndexSet& support, const Vector& w_bound = Vector()) {
  if (beta_star.size() != data.p()) throw DomainError("beta_star length does not match p");
  std::vector<char> in(static_cast<std::size_t>(data.p()), 0);
  for (Index j : support) {
    if (j < 0 || j >= data.p()) throw DomainError("support index out of range");
    in[static_cast<std::size_t>(j)] = 1;
  }
  for (Index j = 0; j < data.p(); ++j)
    if (beta_star[j] != 0.0 && !in[static_cast<std::size_t>(j)])
      throw DomainError("support must contain every nonzero of beta_star");
  return detail::functionals_of_score(score(data, family, beta_star), support, detail::resolve_bound(w_bound, data.p()));
}

struct DataSummary {
  Index n = 0;
  Index p = 0;
  Vector column_norms;  // |x_j|_2^2
  double sigma = 1.0;
  std::optional<Vector> sigma_star_diag;
  IndexSet support;     // t_j = lambda0 on S, w_j lambda1 off S
  Vector w_bound;       // empty means ones
  Vector x_inf_norms;   // |x_j|_inf, needed by the curvature-free mode

  static DataSummary of(const Dataset& d, double sigma = 1.0) {
    DataSummary s;
    s.n = d.n();
    s.p = d.p();
    s.column_norms = d.column_norms();
    s.sigma = sigma;
    s.x_inf_norms = d.x().cwiseAbs().colwise().maxCoeff().transpose();
    return s;
  }
};

struct BoundedCurvature {};
struct CurvatureFree {
  double eta0 = 0.5;
  double m1 = 1.0;
};
using CalibrationMode = std::variant<BoundedCurvature, CurvatureFree>;

struct PenaltyLevel {
  double lambda0 = 0.0;
  double lambda1 = 0.0;
};

namespace detail {
// Smallest t with tail(t) <= target for a decreasing tail; returns the upper end of the bracket.
template <class F>
double bisect_decreasing(F tail, double target) {
  double lo = 0.0, hi = 1.0;
  int guard = 0;
  while (tail(hi) > target) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 200) throw InfeasibleError("no finite level satisfies the tail condition");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    if (tail(mid) <= target) hi = mid;
    else lo = mid;
  }
  return hi;
}
}  // namespace detail

/** Penalty level from the large-deviation bound for the score; lambda0 = lambda1 = t. */
inline PenaltyLevel penalty_level(const GlmFamily& family, const DataSummary& s, double eps0, const CalibrationMode& mode) {
  if (!(eps0 > 0.0 && eps0 < 1.0)) throw DomainError("eps0 must lie in (0,1)");
  if (s.n < 1 || s.p < 1 || s.column_norms.size() != s.p) throw DomainError("summary sizes are inconsistent");
  if (!(s.sigma > 0.0)) throw DomainError("sigma must be positive");
  const double n = static_cast<double>(s.n);
  Vector scale = Vector::Ones(s.p);  // t_j = t * scale_j
  if (s.w_bound.size()) {
    if (s.w_bound.size() != s.p) throw DomainError("w_bound length does not match p");
    std::vector<char> in(static_cast<std::size_t>(s.p), 0);
    for (Index j : s.support) in[static_cast<std::size_t>(j)] = 1;
    for (Index j = 0; j < s.p; ++j)
      if (!in[static_cast<std::size_t>(j)]) scale[j] = s.w_bound[j];
  }
  const double target = eps0 / 2.0;
  if (std::holds_alternative<BoundedCurvature>(mode)) {
    if (!std::isfinite(family.c0))
      throw UnsupportedError(to_string(family.kind) + " family has unbounded curvature; use the curvature-free mode");
    const double c0 = family.c0, s2 = s.sigma * s.sigma;
    bool standard = (scale.array() == 1.0).all();
    for (Index j = 0; j < s.p && standard; ++j) standard = std::abs(s.column_norms[j] - n) <= 1e-12 * n;
    if (standard) {
      double t = s.sigma * std::sqrt(2.0 * c0 / n * std::log(2.0 * static_cast<double>(s.p) / eps0));
      return {t, t};
    }
    auto tail = [&](double t) {
      double acc = 0.0;
      for (Index j = 0; j < s.p; ++j) {
        if (s.column_norms[j] == 0.0) continue;
        double tj = t * scale[j];
        acc += std::exp(-n * n * tj * tj / (2.0 * s2 * c0 * s.column_norms[j]));
      }
      return acc;
    };
    double t = detail::bisect_decreasing(tail, target);
    return {t, t};
  }
  const auto& cf = std::get<CurvatureFree>(mode);
  if (!s.sigma_star_diag || s.sigma_star_diag->size() != s.p)
    throw DomainError("curvature-free calibration needs the diagonal of Sigma*");
  if (s.x_inf_norms.size() != s.p) throw DomainError("curvature-free calibration needs |x_j|_inf");
  const Vector& d = *s.sigma_star_diag;
  const double s2 = s.sigma * s.sigma, shrink = std::exp(-cf.eta0);
  auto tail = [&](double t) {
    double acc = 0.0;
    for (Index j = 0; j < s.p; ++j) {
      if (!(d[j] > 0.0)) return kInf;
      double tj = t * scale[j];
      acc += std::exp(-n * tj * tj * shrink / (2.0 * s2 * d[j]));
    }
    return acc;
  };
  double t = detail::bisect_decreasing(tail, target);
  double worst = 0.0;
  for (Index j = 0; j < s.p; ++j) worst = std::max(worst, s.x_inf_norms[j] * t * scale[j] / d[j]);
  if (cf.m1 * worst > cf.eta0 * std::exp(cf.eta0))
    throw InfeasibleError("curvature-free calibration: the sup-norm display M1 max_j |x_j|_inf t_j / Sigma*_jj <= eta0 e^eta0 "
                          "fails at the smallest t satisfying the exponential-sum display");
  return {t, t};
}

/** Fraction of simulated responses with z0 <= lambda0 and z1 <= lambda1. */
inline double monte_carlo_event_probability(const Dataset& data, const GlmFamily& family, const Vector& beta_star,
                                            const IndexSet& support, const Vector& w_bound, double lambda0,
                                            double lambda1, int replicates, std::uint64_t seed) {
  if (replicates < 1) throw DomainError("replicates must be positive");
  const Vector w = detail::resolve_bound(w_bound, data.p());
  std::vector<char> hit(static_cast<std::size_t>(replicates), 0);
  parallel_for(static_cast<std::size_t>(replicates), [&](std::size_t k) {
    Philox4x32 rng(seed, k);
    Dataset sim = data.with_response(draw_response(family, data.x(), beta_star, rng));
    auto f = detail::functionals_of_score(score(sim, family, beta_star), support, w);
    hit[k] = f.z0 <= lambda0 && f.z1 <= lambda1;
  });
  double c = 0.0;
  for (char h : hit) c += h;
  return c / replicates;
}

struct XiEvent {
  double xi_effective = kInf;
  bool holds_for(double xi) const { return xi_effective <= xi; }
};

// xi_eff = (|w_S|_inf lambda + z0) / (lambda - z1), infinite when lambda <= z1.
inline XiEvent event_xi_check(double w_s_inf, double lambda, double z0, double z1) {
  XiEvent e;
  if (lambda > z1) e.xi_effective = (w_s_inf * lambda + z0) / (lambda - z1);
  return e;
}

struct OracleBound {
  double lq_bound = 0.0;
  std::optional<double> bregman_bound;
};

/** e^eta (|w_S|_inf lambda + z0) |S|^{1/q} / F0(phi_q); optional Bregman bound with F0(phi_1S). */
inline OracleBound oracle_bound(double eta, double w_s_inf, double lambda, double z0, Index s_size, double q,
                                double factor, std::optional<double> factor_phi1s = std::nullopt) {
  if (!(factor > 0.0)) throw DomainError("factor must be positive");
  if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("eta must lie in [0,1]");
  if (!(q > 0.0)) throw DomainError("q must be positive");
  const double s = static_cast<double>(s_size);
  const double lead = std::exp(eta) * (w_s_inf * lambda + z0);
  OracleBound out;
  out.lq_bound = lead * (std::isinf(q) ? 1.0 : std::pow(s, 1.0 / q)) / factor;
  if (factor_phi1s) {
    if (!(*factor_phi1s > 0.0)) throw DomainError("factor must be positive");
    out.bregman_bound = lead * (w_s_inf * lambda + z0) * s / *factor_phi1s;
  }
  return out;
}

}  // namespace wlasso
