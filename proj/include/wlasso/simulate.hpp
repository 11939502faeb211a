#pragma once

#include <wlasso/glm.hpp>
#include <wlasso/rng.hpp>

#include <cmath>

namespace wlasso {

// Response drawn from the family at linear predictor X beta: Gaussian with sd sigma,
// Bernoulli, or Poisson.
inline Vector draw_response(const GlmFamily& family, const Matrix& x, const Vector& beta, Philox4x32& rng) {
  Vector theta = x * beta;
  detail::check_predictor(family, theta);
  Vector y(theta.size());
  const double sd = family.sigma();
  for (Index i = 0; i < theta.size(); ++i) {
    switch (family.kind) {
      case FamilyKind::linear: y[i] = theta[i] + sd * rng.normal(); break;
      case FamilyKind::logistic: y[i] = rng.bernoulli(family.psi0_dot(theta[i])) ? 1.0 : 0.0; break;
      case FamilyKind::poisson: y[i] = rng.poisson(std::exp(theta[i])); break;
    }
  }
  return y;
}

}  // namespace wlasso
