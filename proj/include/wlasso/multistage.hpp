#pragma once

#include <wlasso/common.hpp>
#include <wlasso/glm.hpp>
#include <wlasso/penalty.hpp>
#include <wlasso/solver.hpp>

#include <cmath>
#include <optional>
#include <vector>

namespace wlasso {

struct MultistageConfig {
  PenaltySpec penalty;
  int stages = 3;
  FitConfig base_fit;
  std::optional<Vector> track_target;
};

struct StageRecord {
  Vector beta;
  Vector weights_used;
  double kkt_residual = 0.0;
  bool converged = false;
  std::optional<double> l2_error_to_target;
  Index active_set_size = 0;
};

struct StageTrace {
  std::vector<StageRecord> stages;
};

namespace detail {
// Coordinates with zero weight in the template stay unpenalized at every stage.
inline IndexSet unpenalized_of(const FitConfig& base, Index p) {
  IndexSet out;
  if (base.weights.size() == 0) return out;
  if (base.weights.size() != p) throw DomainError("base weights length does not match p");
  for (Index j = 0; j < p; ++j)
    if (base.weights[j] == 0.0) out.push_back(j);
  return out;
}
}  // namespace detail

/** One adaptive Lasso step: weights rho'(|beta_tilde_j|)/lambda, level penalty.lambda. */
inline FitResult run_adaptive_step(const Dataset& data, const GlmFamily& family, const PenaltySpec& penalty,
                                   const Vector& beta_tilde, const FitConfig& base_fit) {
  if (beta_tilde.size() != data.p()) throw DomainError("beta_tilde length does not match p");
  FitConfig cfg = base_fit;
  cfg.lambda = penalty.lambda;
  cfg.weights = weights_from_estimate(penalty, beta_tilde, detail::unpenalized_of(base_fit, data.p()));
  return fit_weighted_lasso(data, family, cfg);
}

inline StageTrace run_recursion(const Dataset& data, const GlmFamily& family, const MultistageConfig& config) {
  if (config.stages < 1) throw DomainError("stages must be at least 1");
  const Index p = data.p();
  IndexSet unpenalized = detail::unpenalized_of(config.base_fit, p);
  FitConfig cfg = config.base_fit;
  cfg.lambda = config.penalty.lambda;
  cfg.weights = Vector::Ones(p);
  for (Index j : unpenalized) cfg.weights[j] = 0.0;

  StageTrace trace;
  auto record = [&](const FitResult& r) {
    StageRecord s;
    s.beta = r.beta_hat;
    s.weights_used = r.weights;
    s.kkt_residual = r.kkt_residual;
    s.converged = r.converged;
    s.active_set_size = static_cast<Index>(r.active_set.size());
    if (config.track_target) {
      if (config.track_target->size() != p) throw DomainError("track_target length does not match p");
      s.l2_error_to_target = (r.beta_hat - *config.track_target).norm();
    }
    trace.stages.push_back(std::move(s));
  };

  FitResult current = fit_weighted_lasso(data, family, cfg);
  record(current);
  for (int k = 1; k <= config.stages; ++k) {
    cfg.weights = weights_from_estimate(config.penalty, current.beta_hat, unpenalized);
    cfg.warm_start = current.beta_hat;
    current = fit_weighted_lasso(data, family, cfg);
    record(current);
  }
  return trace;
}

/** Inputs of the contraction bound. Optional fields enable the corresponding condition checks. */
struct ContractionInputs {
  double kappa = 0.0;
  double f_star = 1.0;   // lower bound on F2(xi, S) over S >= S0, |S \ S0| <= ell_star
  double f0_phi2 = 1.0;  // F0(xi, S0; phi_2)
  Index s0_size = 1;
  double eta = 0.0;
  double gamma0 = 1.0;
  double a_const = 2.0;
  double lambda0 = 0.0;
  double rho_s0_norm = 0.0;    // |rho'_lambda(|beta*_S0|)|_2
  double noise_s0_norm = 0.0;  // |(z - psi_dot(beta*))_S0|_2
  Index ell_star = 1;
  int stages = 3;
  std::optional<double> xi;
  std::optional<double> f0_phi0;  // F0(xi, S; phi0); infinite for the linear family
  std::optional<double> f2_min;   // F2(xi, S) for the S of interest
  std::optional<double> n;        // sample size, sigma, eps0 for the noise-bound condition
  std::optional<double> sigma;
  std::optional<double> eps0;
};

struct ContractionReport {
  ContractionInputs inputs;
  double lambda = 0.0;
  double r0 = 0.0;
  bool contracts = false;
  std::vector<double> radii;  // R(0..stages) when contracting, else only R(0)
  double r_infinity = kInf;
  double xi_required = 0.0;          // (A+1)/(A-1)
  double xi_required_one_step = 0.0; // (A+1-kappa*gamma0)/(A-1)
  std::optional<bool> xi_ok;
  std::optional<bool> adaptive_condition;   // lambda0{1+A/(1-kappa g0)} <= F0(phi0) eta e^-eta and F* <= F2
  std::optional<bool> radius_condition;     // e^eta{1+(1-kappa g0)/A}sqrt|S0|/F0(phi2) <= g0 sqrt(ell*)
  std::optional<bool> noise_condition;      // (|rho'|+n^-1/2 sigma sqrt(2|S0|log(4|S0|/eps0)))/(e^-eta F*(1-r0)) <= g0 A lambda0 sqrt(ell*)/(1-kappa g0)
};

inline ContractionReport contraction_report(const ContractionInputs& in) {
  if (!(in.eta >= 0.0 && in.eta < 1.0)) throw DomainError("eta must lie in [0,1)");
  if (!(in.gamma0 > 0.0) || (in.kappa > 0.0 && !(in.gamma0 < 1.0 / in.kappa)))
    throw DomainError("gamma0 must lie in (0, 1/kappa)");
  if (!(in.a_const > 1.0)) throw DomainError("A must exceed 1");
  if (!(in.f_star > 0.0) || !(in.f0_phi2 > 0.0)) throw DomainError("factors must be positive");
  if (in.s0_size < 1 || in.stages < 0 || in.ell_star < 0) throw DomainError("sizes must be nonnegative");

  ContractionReport out;
  out.inputs = in;
  const double k = in.kappa, g0 = in.gamma0, A = in.a_const, e = std::exp(in.eta);
  const double one_minus = 1.0 - k * g0;
  out.lambda = A * in.lambda0 / one_minus;
  out.r0 = (e / in.f_star) * (k + 1.0 / (g0 * A) - k / A);
  out.contracts = out.r0 < 1.0;
  const double r_zero = e * out.lambda * (1.0 + one_minus / A) * std::sqrt(static_cast<double>(in.s0_size)) / in.f0_phi2;
  out.radii.push_back(r_zero);
  if (out.contracts) {
    out.r_infinity = (in.rho_s0_norm + in.noise_s0_norm) * e / (in.f_star * (1.0 - out.r0));
    for (int s = 1; s <= in.stages; ++s) {
      const double rk = std::pow(out.r0, s);
      out.radii.push_back((1.0 - rk) * out.r_infinity + rk * r_zero);
    }
  }
  out.xi_required = (A + 1.0) / (A - 1.0);
  out.xi_required_one_step = (A + 1.0 - k * g0) / (A - 1.0);
  if (in.xi) out.xi_ok = *in.xi >= out.xi_required;
  const double sqrt_ell = std::sqrt(static_cast<double>(in.ell_star));
  out.radius_condition =
      e * (1.0 + one_minus / A) * std::sqrt(static_cast<double>(in.s0_size)) / in.f0_phi2 <= g0 * sqrt_ell;
  if (in.f0_phi0 && in.f2_min) {
    const double lhs = in.lambda0 * (1.0 + A / one_minus);
    const double rhs = std::isinf(*in.f0_phi0) ? kInf : *in.f0_phi0 * in.eta * std::exp(-in.eta);
    out.adaptive_condition = lhs <= rhs && in.f_star <= *in.f2_min;
  }
  if (in.n && in.sigma && in.eps0 && out.contracts) {
    const double s0 = static_cast<double>(in.s0_size);
    const double num = in.rho_s0_norm + *in.sigma * std::sqrt(2.0 * s0 * std::log(4.0 * s0 / *in.eps0) / *in.n);
    const double lhs = num / (std::exp(-in.eta) * in.f_star * (1.0 - out.r0));
    out.noise_condition = lhs <= g0 * A * in.lambda0 * sqrt_ell / one_minus;
  } else if (in.n && in.sigma && in.eps0) {
    out.noise_condition = false;
  }
  return out;
}

/**
 * Event under which the stage radii hold for one replicate:
 * |z - psi_dot(beta*)|_inf <= lambda0 and R(inf) <= gamma0 * lambda * sqrt(ell*).
 */
inline bool recursion_event(const ContractionReport& rep, double noise_sup) {
  if (!rep.contracts) return false;
  return noise_sup <= rep.inputs.lambda0 &&
         rep.r_infinity <= rep.inputs.gamma0 * rep.lambda * std::sqrt(static_cast<double>(rep.inputs.ell_star));
}

// Stages needed before the geometric term drops to the R(inf) level: log(R0/Rinf)/|log r0|, at least 0.
inline int suggested_stages(const ContractionReport& rep) {
  if (!rep.contracts || rep.radii.empty() || !(rep.r_infinity > 0.0) || rep.r0 <= 0.0) return 0;
  const double ratio = rep.radii.front() / rep.r_infinity;
  if (ratio <= 1.0) return 0;
  return static_cast<int>(std::ceil(std::log(ratio) / std::abs(std::log(rep.r0))));
}

}  // namespace wlasso
