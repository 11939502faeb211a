#pragma once

#include <wlasso/common.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace wlasso {

enum class PenaltyKind { l1, mcp, scad };

/**
 * Penalty rho_lambda with rho'(0+) = lambda.
 * `concavity` is gamma for MCP and a for SCAD; ignored for l1.
 */
struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::l1;
  double lambda = 1.0;
  double concavity = 0.0;

  static PenaltySpec l1(double lambda) { return checked({PenaltyKind::l1, lambda, 0.0}); }
  static PenaltySpec mcp(double lambda, double gamma = 3.0) { return checked({PenaltyKind::mcp, lambda, gamma}); }
  static PenaltySpec scad(double lambda, double a = 3.7) { return checked({PenaltyKind::scad, lambda, a}); }

  PenaltySpec with_lambda(double l) const { return checked({kind, l, concavity}); }

  static PenaltySpec checked(PenaltySpec s) {
    if (!(s.lambda > 0.0) || !std::isfinite(s.lambda)) throw DomainError("penalty lambda must be positive");
    if (s.kind == PenaltyKind::mcp && !(s.concavity > 1.0)) throw DomainError("MCP gamma must exceed 1");
    if (s.kind == PenaltyKind::scad && !(s.concavity > 2.0)) throw DomainError("SCAD a must exceed 2");
    return s;
  }
};

// "l1", "mcp:3", "scad:3.7"; bare "mcp"/"scad" take the default parameter.
inline PenaltySpec parse_penalty(const std::string& text, double lambda) {
  auto colon = text.find(':');
  std::string name = text.substr(0, colon);
  double param = 0.0;
  if (colon != std::string::npos) {
    try {
      std::size_t used = 0;
      param = std::stod(text.substr(colon + 1), &used);
      if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DomainError("bad penalty parameter in '" + text + "'");
    }
  }
  if (name == "l1") return PenaltySpec::l1(lambda);
  if (name == "mcp") return PenaltySpec::mcp(lambda, colon == std::string::npos ? 3.0 : param);
  if (name == "scad") return PenaltySpec::scad(lambda, colon == std::string::npos ? 3.7 : param);
  throw DomainError("unknown penalty '" + text + "'");
}

inline std::string to_string(const PenaltySpec& s) {
  switch (s.kind) {
    case PenaltyKind::l1: return "l1";
    case PenaltyKind::mcp: return "mcp:" + std::to_string(s.concavity);
    case PenaltyKind::scad: return "scad:" + std::to_string(s.concavity);
  }
  return "?";
}

inline double rho_derivative(const PenaltySpec& s, double t) {
  if (!(t >= 0.0)) throw DomainError("rho_derivative needs t >= 0");
  const double lam = s.lambda;
  switch (s.kind) {
    case PenaltyKind::l1: return lam;
    case PenaltyKind::mcp: return std::max(lam - t / s.concavity, 0.0);
    case PenaltyKind::scad: {
      const double a = s.concavity;
      if (t <= lam) return lam;
      if (t >= a * lam) return 0.0;
      return std::clamp((a * lam - t) / (a - 1.0), 0.0, lam);
    }
  }
  return lam;
}

// Penalty value; only used for reporting objectives.
inline double rho_value(const PenaltySpec& s, double t) {
  if (!(t >= 0.0)) throw DomainError("rho_value needs t >= 0");
  const double lam = s.lambda;
  switch (s.kind) {
    case PenaltyKind::l1: return lam * t;
    case PenaltyKind::mcp: {
      const double g = s.concavity;
      if (t <= g * lam) return lam * t - t * t / (2.0 * g);
      return 0.5 * g * lam * lam;
    }
    case PenaltyKind::scad: {
      const double a = s.concavity;
      if (t <= lam) return lam * t;
      if (t <= a * lam) return (2.0 * a * lam * t - t * t - lam * lam) / (2.0 * (a - 1.0));
      return 0.5 * lam * lam * (a + 1.0);
    }
  }
  return lam * t;
}

inline double lipschitz_kappa(const PenaltySpec& s) {
  switch (s.kind) {
    case PenaltyKind::l1: return 0.0;
    case PenaltyKind::mcp: return 1.0 / s.concavity;
    case PenaltyKind::scad: return 1.0 / (s.concavity - 1.0);
  }
  return 0.0;
}

/** w_j = rho'(|beta_tilde_j|)/lambda, zero on unpenalized coordinates. */
inline Vector weights_from_estimate(const PenaltySpec& s, const Vector& beta_tilde, const IndexSet& unpenalized = {}) {
  if (!beta_tilde.allFinite()) throw DomainError("beta_tilde has non-finite entries");
  Vector w(beta_tilde.size());
  for (Index j = 0; j < beta_tilde.size(); ++j) w[j] = rho_derivative(s, std::abs(beta_tilde[j])) / s.lambda;
  for (Index j : unpenalized) {
    if (j < 0 || j >= w.size()) throw DomainError("unpenalized index out of range");
    w[j] = 0.0;
  }
  return w;
}

}  // namespace wlasso
