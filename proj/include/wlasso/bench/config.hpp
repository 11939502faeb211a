#pragma once

#include <wlasso/common.hpp>
#include <wlasso/glm.hpp>
#include <wlasso/penalty.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

namespace wlasso::bench {

enum class Experiment { fit, path, multistage, oracle_verify, selection_verify, sparsity_verify, diagnostics };

inline std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::fit: return "fit";
    case Experiment::path: return "path";
    case Experiment::multistage: return "multistage";
    case Experiment::oracle_verify: return "oracle_verify";
    case Experiment::selection_verify: return "selection_verify";
    case Experiment::sparsity_verify: return "sparsity_verify";
    case Experiment::diagnostics: return "diagnostics";
  }
  return "unknown";
}

// Accepts both "oracle_verify" and the CLI spelling "oracle-verify".
inline Experiment experiment_from_string(std::string s) {
  for (auto& c : s)
    if (c == '-') c = '_';
  for (Experiment e : {Experiment::fit, Experiment::path, Experiment::multistage, Experiment::oracle_verify,
                       Experiment::selection_verify, Experiment::sparsity_verify, Experiment::diagnostics})
    if (to_string(e) == s) return e;
  throw DomainError("unknown experiment '" + s + "'");
}

enum class DesignKind { identity, gaussian_iid, gaussian_correlated, from_file };

inline std::string to_string(DesignKind d) {
  switch (d) {
    case DesignKind::identity: return "identity";
    case DesignKind::gaussian_iid: return "gaussian_iid";
    case DesignKind::gaussian_correlated: return "gaussian_correlated";
    case DesignKind::from_file: return "from_file";
  }
  return "unknown";
}

inline DesignKind design_from_string(const std::string& s) {
  for (DesignKind d : {DesignKind::identity, DesignKind::gaussian_iid, DesignKind::gaussian_correlated,
                       DesignKind::from_file})
    if (to_string(d) == s) return d;
  throw DomainError("unknown design '" + s + "'");
}

struct DesignSpec {
  DesignKind kind = DesignKind::gaussian_iid;
  double rho = 0.0;   // AR(1) correlation between neighbouring columns
  std::string path;   // from_file
  bool header = false;

  static DesignSpec identity() { return {DesignKind::identity}; }
  static DesignSpec gaussian_iid() { return {DesignKind::gaussian_iid}; }
  static DesignSpec gaussian_correlated(double rho) { return {DesignKind::gaussian_correlated, rho}; }
  static DesignSpec from_file(std::string path, bool header = false) {
    return {DesignKind::from_file, 0.0, std::move(path), header};
  }
};

struct ExperimentConfig {
  Experiment experiment = Experiment::fit;
  std::string family = "linear";
  double sigma2 = 1.0;
  std::string penalty = "l1";
  Index n = 100;
  Index p = 50;
  Index s0_size = 5;
  double beta_min = 1.0;
  double beta_max = 1.0;
  DesignSpec design;
  bool standardize = true;
  int replicates = 1;
  double eps0 = 0.05;
  double xi = 3.0;
  std::uint64_t seed = 0;
  std::string output;
  std::string format = "json";
  std::optional<double> lambda;  // nullopt: calibrated from the noise level

  // analysis knobs
  double eta = 0.5;          // ball radius in the GLM conditions; 0 is used for the linear family
  int stages = 3;            // multistage recursion depth
  double a_const = 3.0;      // A in lambda = A lambda0 / (1 - kappa gamma0)
  double gamma0 = 1.0;
  Index ell_star = 0;        // 0: use s0_size
  double alpha = 0.8;        // sparsity-bound slack
  int path_points = 20;
  double path_ratio = 0.01;  // lambda_min / lambda_max on the path
  int selection_samples = 0; // 0: irrepresentable quantities at beta* only
  int enumeration_cap = 12;
  int search_restarts = 64;
  unsigned threads = 0;

  GlmFamily glm_family() const { return GlmFamily::make(family_from_string(family), sigma2); }
  PenaltySpec penalty_spec(double level) const { return parse_penalty(penalty, level); }
  Index ell() const { return ell_star > 0 ? ell_star : s0_size; }
  double eta_for(const GlmFamily& f) const { return f.m1 == 0.0 ? 0.0 : eta; }

  void validate() const {
    glm_family();
    penalty_spec(1.0);
    if (design.kind != DesignKind::from_file && (n < 1 || p < 1)) throw DomainError("n and p must be positive");
    if (s0_size < 0 || (design.kind != DesignKind::from_file && s0_size > p))
      throw DomainError("s0_size must lie in [0, p]");
    if (replicates < 1) throw DomainError("replicates must be at least 1");
    if (!(beta_min >= 0.0) || !(beta_max >= beta_min)) throw DomainError("need 0 <= beta_min <= beta_max");
    if (design.kind == DesignKind::gaussian_correlated && !(design.rho > -1.0 && design.rho < 1.0))
      throw DomainError("rho must lie in (-1, 1)");
    if (design.kind == DesignKind::identity && n < p) throw DomainError("identity design needs n >= p");
    if (design.kind == DesignKind::from_file && design.path.empty()) throw DomainError("from_file needs a path");
    if (!(eps0 > 0.0 && eps0 < 1.0)) throw DomainError("eps0 must lie in (0,1)");
    if (!(xi > 0.0) || !std::isfinite(xi)) throw DomainError("xi must be positive");
    if (lambda && !(*lambda > 0.0)) throw DomainError("lambda must be positive");
    if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("eta must lie in [0,1]");
    if (stages < 1) throw DomainError("stages must be at least 1");
    if (!(a_const > 1.0)) throw DomainError("A must exceed 1");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0,1]");
    if (path_points < 1 || !(path_ratio > 0.0 && path_ratio < 1.0)) throw DomainError("path needs points >= 1 and ratio in (0,1)");
    if (format != "json" && format != "csv") throw DomainError("format must be json or csv");
  }
};

}  // namespace wlasso::bench
