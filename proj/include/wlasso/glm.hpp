#pragma once

#include <wlasso/common.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace wlasso {

enum class FamilyKind { linear, logistic, poisson };

inline std::string to_string(FamilyKind k) {
  switch (k) {
    case FamilyKind::linear: return "linear";
    case FamilyKind::logistic: return "logistic";
    case FamilyKind::poisson: return "poisson";
  }
  return "unknown";
}

inline FamilyKind family_from_string(const std::string& s) {
  if (s == "linear" || s == "gaussian") return FamilyKind::linear;
  if (s == "logistic" || s == "binomial") return FamilyKind::logistic;
  if (s == "poisson") return FamilyKind::poisson;
  throw DomainError("unknown family '" + s + "'");
}

/**
 * Canonical exponential family with cumulant psi0.
 * m1 bounds the log-curvature ratio |log psi0''(a) - log psi0''(b)| <= m1|a-b|,
 * c0 = sup psi0'' (infinite for poisson).
 */
struct GlmFamily {
  FamilyKind kind = FamilyKind::linear;
  double sigma2 = 1.0;
  double m1 = 0.0;
  double eta_star = kInf;
  double c0 = 1.0;

  static GlmFamily linear(double sigma2 = 1.0) { return {FamilyKind::linear, check_sigma(sigma2), 0.0, kInf, 1.0}; }
  static GlmFamily logistic(double sigma2 = 1.0) { return {FamilyKind::logistic, check_sigma(sigma2), 1.0, kInf, 0.25}; }
  static GlmFamily poisson(double sigma2 = 1.0) { return {FamilyKind::poisson, check_sigma(sigma2), 1.0, kInf, kInf}; }
  static GlmFamily make(FamilyKind k, double sigma2 = 1.0) {
    switch (k) {
      case FamilyKind::linear: return linear(sigma2);
      case FamilyKind::logistic: return logistic(sigma2);
      case FamilyKind::poisson: return poisson(sigma2);
    }
    throw DomainError("bad family");
  }

  double sigma() const { return std::sqrt(sigma2); }

  // Largest linear predictor accepted before exp() is considered an overflow.
  static constexpr double kMaxExponent = 700.0;

  double psi0(double t) const {
    switch (kind) {
      case FamilyKind::linear: return 0.5 * t * t;
      case FamilyKind::logistic: return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
      case FamilyKind::poisson: return std::exp(t);
    }
    return 0.0;
  }
  double psi0_dot(double t) const {
    switch (kind) {
      case FamilyKind::linear: return t;
      case FamilyKind::logistic:
        if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
        else {
          double e = std::exp(t);
          return e / (1.0 + e);
        }
      case FamilyKind::poisson: return std::exp(t);
    }
    return 0.0;
  }
  double psi0_ddot(double t) const {
    switch (kind) {
      case FamilyKind::linear: return 1.0;
      case FamilyKind::logistic: {
        double e = std::exp(-std::abs(t));
        return e / ((1.0 + e) * (1.0 + e));
      }
      case FamilyKind::poisson: return std::exp(t);
    }
    return 0.0;
  }
  double psi0_dddot(double t) const {
    switch (kind) {
      case FamilyKind::linear: return 0.0;
      case FamilyKind::logistic: {
        double p = psi0_dot(t);
        return p * (1.0 - p) * (1.0 - 2.0 * p);
      }
      case FamilyKind::poisson: return std::exp(t);
    }
    return 0.0;
  }

  static double check_sigma(double s2) {
    if (!(s2 > 0.0) || !std::isfinite(s2)) throw DomainError("sigma2 must be positive and finite");
    return s2;
  }
};

/** Observed design and response. */
class Dataset {
 public:
  Dataset() = default;
  Dataset(Matrix x, Vector y) : x_(std::move(x)), y_(std::move(y)) {
    if (x_.rows() < 1 || x_.cols() < 1) throw DomainError("dataset needs n >= 1 and p >= 1");
    if (y_.size() != x_.rows())
      throw DomainError("response length " + std::to_string(y_.size()) + " does not match n = " +
                        std::to_string(x_.rows()));
    if (!x_.allFinite()) throw DomainError("design matrix has non-finite entries");
    if (!y_.allFinite()) throw DomainError("response has non-finite entries");
    column_norms_ = x_.colwise().squaredNorm().transpose();
    z_ = x_.transpose() * y_ / static_cast<double>(n());
  }

  Index n() const { return x_.rows(); }
  Index p() const { return x_.cols(); }
  const Matrix& x() const { return x_; }
  const Vector& y() const { return y_; }
  // |x_j|_2^2
  const Vector& column_norms() const { return column_norms_; }
  // X'y/n
  const Vector& z() const { return z_; }

  // Same design, new response.
  Dataset with_response(Vector y) const { return Dataset(x_, std::move(y)); }

  void validate_for(const GlmFamily& family) const {
    if (family.kind == FamilyKind::logistic) {
      for (Index i = 0; i < n(); ++i)
        if (y_[i] != 0.0 && y_[i] != 1.0)
          throw DomainError("logistic response must be 0/1; row " + std::to_string(i) + " has " +
                            std::to_string(y_[i]));
    } else if (family.kind == FamilyKind::poisson) {
      for (Index i = 0; i < n(); ++i)
        if (y_[i] < 0.0)
          throw DomainError("poisson response must be nonnegative; row " + std::to_string(i));
    }
  }

 private:
  Matrix x_;
  Vector y_;
  Vector column_norms_;
  Vector z_;
};

struct LossEvaluation {
  double value = 0.0;
  Vector gradient;          // psi_dot(beta) - z
  Vector linear_predictor;  // X beta
  Vector curvature;         // psi0''(theta_i)
};

namespace detail {
inline void check_predictor(const GlmFamily& family, const Vector& theta) {
  for (Index i = 0; i < theta.size(); ++i) {
    if (!std::isfinite(theta[i]))
      throw OverflowError("non-finite linear predictor at row " + std::to_string(i), i);
    if (family.kind == FamilyKind::poisson && theta[i] > GlmFamily::kMaxExponent)
      throw OverflowError("poisson linear predictor " + std::to_string(theta[i]) + " exceeds " +
                              std::to_string(GlmFamily::kMaxExponent) + " at row " + std::to_string(i),
                          i);
  }
}
}  // namespace detail

// Loss value only, from a precomputed linear predictor.
inline double loss_from_predictor(const Dataset& data, const GlmFamily& family, const Vector& theta,
                                  const Vector& beta) {
  detail::check_predictor(family, theta);
  double s = 0.0;
  for (Index i = 0; i < theta.size(); ++i) s += family.psi0(theta[i]);
  return s / static_cast<double>(data.n()) - data.z().dot(beta);
}

inline LossEvaluation evaluate_loss(const Dataset& data, const GlmFamily& family, const Vector& beta) {
  if (beta.size() != data.p()) throw DomainError("beta length does not match p");
  if (!beta.allFinite()) throw DomainError("beta has non-finite entries");
  LossEvaluation out;
  out.linear_predictor = data.x() * beta;
  const Vector& theta = out.linear_predictor;
  detail::check_predictor(family, theta);
  const double n = static_cast<double>(data.n());
  Vector mean(theta.size());
  out.curvature.resize(theta.size());
  double s = 0.0;
  for (Index i = 0; i < theta.size(); ++i) {
    s += family.psi0(theta[i]);
    mean[i] = family.psi0_dot(theta[i]);
    out.curvature[i] = family.psi0_ddot(theta[i]);
  }
  out.value = s / n - data.z().dot(beta);
  out.gradient = data.x().transpose() * mean / n - data.z();
  return out;
}

// psi_dot(beta) = X' psi0'(X beta) / n
inline Vector mean_gradient(const Dataset& data, const GlmFamily& family, const Vector& beta) {
  Vector theta = data.x() * beta;
  detail::check_predictor(family, theta);
  Vector mean = theta.unaryExpr([&](double t) { return family.psi0_dot(t); });
  return data.x().transpose() * mean / static_cast<double>(data.n());
}

/** Symmetrized Bregman divergence <beta - beta*, psi_dot(beta) - psi_dot(beta*)>. */
inline double bregman_divergence(const Dataset& data, const GlmFamily& family, const Vector& beta,
                                 const Vector& beta_star) {
  if (!beta.allFinite() || !beta_star.allFinite()) throw DomainError("non-finite coefficients");
  Vector theta = data.x() * beta;
  Vector theta_star = data.x() * beta_star;
  detail::check_predictor(family, theta);
  detail::check_predictor(family, theta_star);
  double s = 0.0;
  if (family.kind == FamilyKind::linear) {
    Vector d = data.x() * (beta - beta_star);
    s = d.squaredNorm();
  } else {
    for (Index i = 0; i < theta.size(); ++i)
      s += (theta[i] - theta_star[i]) * (family.psi0_dot(theta[i]) - family.psi0_dot(theta_star[i]));
  }
  return std::max(0.0, s) / static_cast<double>(data.n());
}

/** Max over coordinates of |analytic - central difference| / max(1, |analytic|). */
inline double gradient_check(const Dataset& data, const GlmFamily& family, const Vector& beta, double step) {
  if (!(step > 0.0)) throw DomainError("step must be positive");
  LossEvaluation at = evaluate_loss(data, family, beta);
  double worst = 0.0;
  Vector b = beta;
  for (Index j = 0; j < beta.size(); ++j) {
    b[j] = beta[j] + step;
    double up = evaluate_loss(data, family, b).value;
    b[j] = beta[j] - step;
    double down = evaluate_loss(data, family, b).value;
    b[j] = beta[j];
    double fd = (up - down) / (2.0 * step);
    double err = std::abs(fd - at.gradient[j]) / std::max(1.0, std::abs(at.gradient[j]));
    worst = std::max(worst, err);
  }
  return worst;
}

/** Sigma* = X' diag(psi0''(X beta*)) X / n. */
inline Matrix sigma_star(const Dataset& data, const GlmFamily& family, const Vector& beta_star) {
  Vector theta = data.x() * beta_star;
  detail::check_predictor(family, theta);
  Vector v = theta.unaryExpr([&](double t) { return family.psi0_ddot(t); });
  Matrix xv = data.x().array().colwise() * v.array();
  Matrix s = data.x().transpose() * xv / static_cast<double>(data.n());
  return 0.5 * (s + s.transpose());
}

// Score z - psi_dot(beta*); the noise vector of every oracle inequality.
inline Vector score(const Dataset& data, const GlmFamily& family, const Vector& beta_star) {
  return data.z() - mean_gradient(data, family, beta_star);
}

}  // namespace wlasso
