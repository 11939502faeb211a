#pragma once

#include <wlasso/common.hpp>
#include <wlasso/glm.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace wlasso {

struct FitConfig {
  double lambda = 1.0;
  Vector weights;  // empty means all ones
  int max_outer_iterations = 200;
  int max_inner_sweeps = 1000;
  double kkt_tolerance = 1e-8;
  double coordinate_tolerance = 1e-12;
  std::optional<Vector> warm_start;
};

struct FitResult {
  Vector beta_hat;
  double kkt_residual = kInf;
  double objective = kInf;
  IndexSet active_set;
  int outer_iterations = 0;
  bool converged = false;
  Vector negative_gradient;  // z - psi_dot(beta_hat)
  std::vector<double> objective_trace;
  int inner_sweeps = 0;
  double lambda = 0.0;
  Vector weights;
};

/** Largest violation of the weighted-Lasso KKT conditions given g = z - psi_dot(beta). */
inline double kkt_residual_from_gradient(const Vector& neg_grad, const Vector& beta, double lambda, const Vector& w) {
  double r = 0.0;
  for (Index j = 0; j < beta.size(); ++j) {
    const double t = w[j] * lambda;
    double v = beta[j] != 0.0 ? std::abs(neg_grad[j] - t * sign(beta[j])) : std::max(std::abs(neg_grad[j]) - t, 0.0);
    r = std::max(r, v);
  }
  return r;
}

inline Vector resolve_weights(const Vector& w, Index p) {
  if (w.size() == 0) return Vector::Ones(p);
  if (w.size() != p) throw DomainError("weights length " + std::to_string(w.size()) + " does not match p");
  for (Index j = 0; j < p; ++j)
    if (!std::isfinite(w[j]) || w[j] < 0.0) throw DomainError("weight " + std::to_string(j) + " is not a finite nonnegative number");
  return w;
}

inline double kkt_certificate(const Dataset& data, const GlmFamily& family, const Vector& beta, double lambda,
                              const Vector& weights) {
  Vector w = resolve_weights(weights, data.p());
  Vector g = data.z() - mean_gradient(data, family, beta);
  return kkt_residual_from_gradient(g, beta, lambda, w);
}

namespace detail {

inline double penalized_objective(double loss, const Vector& beta, double lambda, const Vector& w) {
  return loss + lambda * (w.array() * beta.array().abs()).sum();
}

struct QuadraticModel {
  const Matrix* x;
  Vector v;      // per-row curvature
  Matrix xv;     // diag(v) X
  Vector hdiag;  // (1/n) sum_i v_i x_ij^2
};

// Minimizes grad0'd + d'Hd/2 + lambda|W(beta + d)|_1 over beta by cyclic coordinate descent,
// H = X' diag(v) X / n. Returns sweeps used.
inline int coordinate_descent(const QuadraticModel& m, const Vector& grad0, const Vector& w, double lambda,
                              const std::vector<char>& frozen, Vector& beta, int max_sweeps, double tol) {
  const Matrix& x = *m.x;
  const Index n = x.rows(), p = x.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  Vector vu = Vector::Zero(n);  // diag(v) X (beta - start)
  auto update = [&](Index j) -> double {
    if (frozen[static_cast<std::size_t>(j)]) return 0.0;
    const double h = m.hdiag[j];
    const double gj = grad0[j] + inv_n * x.col(j).dot(vu);
    const double nb = soft_threshold(h * beta[j] - gj, lambda * w[j]) / h;
    const double delta = nb - beta[j];
    if (delta != 0.0) {
      beta[j] = nb;
      vu.noalias() += delta * m.xv.col(j);
    }
    return std::abs(delta) * h;
  };
  int sweeps = 0;
  while (sweeps < max_sweeps) {
    double change = 0.0;
    for (Index j = 0; j < p; ++j) change = std::max(change, update(j));
    ++sweeps;
    if (change <= tol) break;
    // settle the active set before the next full pass
    IndexSet active = support_of(beta);
    while (sweeps < max_sweeps && !active.empty()) {
      double c = 0.0;
      for (Index j : active) c = std::max(c, update(j));
      ++sweeps;
      if (c <= tol) break;
    }
  }
  return sweeps;
}

}  // namespace detail

/**
 * Weighted Lasso: argmin loss(beta) + lambda * sum_j w_j |beta_j|.
 * Proximal Newton outer loop with step-halving on the true objective; inner cyclic
 * coordinate descent. Falls back to the constant-curvature majorizer when a Newton
 * step fails to descend and the family has bounded curvature.
 */
inline FitResult fit_weighted_lasso(const Dataset& data, const GlmFamily& family, const FitConfig& config) {
  const Index p = data.p(), n = data.n();
  if (!(config.lambda > 0.0) || !std::isfinite(config.lambda)) throw DomainError("lambda must be positive and finite");
  if (config.max_outer_iterations < 1 || config.max_inner_sweeps < 1) throw DomainError("iteration budgets must be positive");
  data.validate_for(family);
  const Vector w = resolve_weights(config.weights, p);
  const double lambda = config.lambda;

  Vector beta = Vector::Zero(p);
  if (config.warm_start) {
    if (config.warm_start->size() != p) throw DomainError("warm start length does not match p");
    if (!config.warm_start->allFinite()) throw DomainError("warm start has non-finite entries");
    beta = *config.warm_start;
  }

  std::vector<char> zero_column(static_cast<std::size_t>(p), 0);
  for (Index j = 0; j < p; ++j) {
    if (data.column_norms()[j] == 0.0) {
      zero_column[static_cast<std::size_t>(j)] = 1;
      if (w[j] == 0.0 && data.z()[j] != 0.0)
        throw UnboundedError("coordinate " + std::to_string(j) + " has a zero column, no penalty and nonzero score");
      if (w[j] > 0.0) beta[j] = 0.0;
    }
  }

  FitResult res;
  res.lambda = lambda;
  res.weights = w;
  LossEvaluation eval = evaluate_loss(data, family, beta);
  double obj = detail::penalized_objective(eval.value, beta, lambda, w);
  res.objective_trace.push_back(obj);

  detail::QuadraticModel model{&data.x(), Vector(), Matrix(), Vector()};
  const double inv_n = 1.0 / static_cast<double>(n);
  int outer = 0;
  double r = kkt_residual_from_gradient(-eval.gradient, beta, lambda, w);
  while (r > config.kkt_tolerance && outer < config.max_outer_iterations) {
    ++outer;
    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      bool majorizer = attempt == 1;
      if (majorizer && !std::isfinite(family.c0)) break;
      if (family.kind == FamilyKind::linear) model.v = Vector::Ones(n);
      else if (majorizer) model.v = Vector::Constant(n, family.c0);
      else model.v = eval.curvature.cwiseMax(1e-300);
      model.xv = data.x().array().colwise() * model.v.array();
      model.hdiag = (data.x().array() * model.xv.array()).colwise().sum().transpose() * inv_n;
      std::vector<char> frozen = zero_column;
      for (Index j = 0; j < p; ++j)
        if (!(model.hdiag[j] > 0.0)) frozen[static_cast<std::size_t>(j)] = 1;

      Vector trial = beta;
      res.inner_sweeps += detail::coordinate_descent(model, eval.gradient, w, lambda, frozen, trial,
                                                     config.max_inner_sweeps, config.coordinate_tolerance);
      Vector d = trial - beta;
      if (d.cwiseAbs().maxCoeff() == 0.0) break;
      const double pen_old = (w.array() * beta.array().abs()).sum();
      const double decrease = eval.gradient.dot(d) + lambda * ((w.array() * trial.array().abs()).sum() - pen_old);
      const double slack = 1e-14 * (std::abs(obj) + 1.0);
      double t = 1.0;
      for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
        Vector cand = t == 1.0 ? trial : Vector(beta + t * d);
        double cand_obj;
        Vector theta;
        try {
          theta = data.x() * cand;
          cand_obj = detail::penalized_objective(loss_from_predictor(data, family, theta, cand), cand, lambda, w);
        } catch (const OverflowError&) {
          continue;
        }
        if (cand_obj <= obj + 1e-4 * t * std::min(decrease, 0.0) + slack) {
          beta = cand;
          eval = evaluate_loss(data, family, beta);
          obj = detail::penalized_objective(eval.value, beta, lambda, w);
          accepted = true;
          break;
        }
      }
    }
    res.objective_trace.push_back(obj);
    r = kkt_residual_from_gradient(-eval.gradient, beta, lambda, w);
    if (!accepted) break;
  }

  res.beta_hat = beta;
  res.negative_gradient = -eval.gradient;
  res.kkt_residual = r;
  res.objective = obj;
  res.active_set = support_of(beta);
  res.outer_iterations = outer;
  res.converged = r <= config.kkt_tolerance;
  return res;
}

/** Warm-started fits along a strictly descending lambda grid. */
inline std::vector<FitResult> solution_path(const Dataset& data, const GlmFamily& family, const std::vector<double>& lambdas,
                                            const Vector& weights, FitConfig base = {}) {
  if (lambdas.empty()) throw DomainError("empty lambda grid");
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    if (!(lambdas[k] > 0.0)) throw DomainError("lambda values must be positive");
    if (k > 0 && !(lambdas[k] < lambdas[k - 1])) throw DomainError("lambda grid must be strictly descending");
  }
  std::vector<FitResult> out;
  out.reserve(lambdas.size());
  base.weights = weights;
  for (double lam : lambdas) {
    base.lambda = lam;
    out.push_back(fit_weighted_lasso(data, family, base));
    base.warm_start = out.back().beta_hat;
  }
  return out;
}

// Smallest lambda at which beta = 0 satisfies the KKT conditions (infinite if some
// unpenalized coordinate has a nonzero score at zero).
inline double lambda_max(const Dataset& data, const GlmFamily& family, const Vector& weights) {
  Vector w = resolve_weights(weights, data.p());
  Vector g = data.z() - mean_gradient(data, family, Vector::Zero(data.p()));
  double m = 0.0;
  for (Index j = 0; j < g.size(); ++j) {
    if (w[j] > 0.0) m = std::max(m, std::abs(g[j]) / w[j]);
    else if (g[j] != 0.0) return kInf;
  }
  return m;
}

}  // namespace wlasso
