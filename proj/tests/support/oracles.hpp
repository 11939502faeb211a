#pragma once

// Reference computations written without the library's solver or gradient code.

#include <wlasso/glm.hpp>

#include <algorithm>
#include <cmath>
#include <functional>

namespace testing_support {

using wlasso::Dataset;
using wlasso::GlmFamily;
using wlasso::Matrix;
using wlasso::Vector;

inline double mean_fn(const GlmFamily& f, double t) {
  switch (f.kind) {
    case wlasso::FamilyKind::linear: return t;
    case wlasso::FamilyKind::logistic: return 1.0 / (1.0 + std::exp(-t));
    case wlasso::FamilyKind::poisson: return std::exp(t);
  }
  return 0;
}

inline double cumulant(const GlmFamily& f, double t) {
  switch (f.kind) {
    case wlasso::FamilyKind::linear: return 0.5 * t * t;
    case wlasso::FamilyKind::logistic: return std::log(1.0 + std::exp(t));
    case wlasso::FamilyKind::poisson: return std::exp(t);
  }
  return 0;
}

// g_j = (1/n) sum_i x_ij (y_i - mean(x^i b)), by explicit loops.
inline Vector independent_negative_gradient(const Dataset& d, const GlmFamily& f, const Vector& b) {
  const long n = d.n(), p = d.p();
  Vector g = Vector::Zero(p);
  for (long i = 0; i < n; ++i) {
    double t = 0;
    for (long j = 0; j < p; ++j) t += d.x()(i, j) * b[j];
    double r = d.y()[i] - mean_fn(f, t);
    for (long j = 0; j < p; ++j) g[j] += d.x()(i, j) * r;
  }
  return g / static_cast<double>(n);
}

inline double independent_kkt(const Vector& g, const Vector& b, double lambda, const Vector& w) {
  double r = 0;
  for (long j = 0; j < b.size(); ++j) {
    double t = lambda * w[j];
    if (b[j] > 0) r = std::max(r, std::abs(g[j] - t));
    else if (b[j] < 0) r = std::max(r, std::abs(g[j] + t));
    else r = std::max(r, std::abs(g[j]) - t);
  }
  return std::max(r, 0.0);
}

inline double penalized(const Dataset& d, const GlmFamily& f, const Vector& b, double lambda, const Vector& w) {
  const long n = d.n();
  double s = 0;
  for (long i = 0; i < n; ++i) {
    double t = d.x().row(i).dot(b);
    s += cumulant(f, t) - d.y()[i] * t;
  }
  return s / n + lambda * (w.array() * b.array().abs()).sum();
}

// Dense grid over a box that must contain the minimizer, then proximal gradient
// with backtracking from the best grid point. Intended for p <= 3 and positive weights.
inline Vector brute_force_lasso(const Dataset& d, const GlmFamily& f, double lambda, const Vector& w) {
  const long p = d.p(), n = d.n();
  // loss + constant >= 0 for every family, so lambda*min(w)*|b|_1 <= F(0) - F_lower.
  double lower = 0;
  for (long i = 0; i < n; ++i) {
    double y = d.y()[i];
    if (f.kind == wlasso::FamilyKind::linear) lower += -0.5 * y * y;
    else if (f.kind == wlasso::FamilyKind::poisson) lower += y > 0 ? y - y * std::log(y) : 0.0;
  }
  lower /= n;
  double f0 = penalized(d, f, Vector::Zero(p), lambda, w);
  double box = std::min((f0 - lower) / (lambda * w.minCoeff()), 20.0);
  const int steps = p == 1 ? 4001 : p == 2 ? 401 : 61;
  Vector best = Vector::Zero(p), cur(p);
  double best_val = f0;
  std::vector<int> idx(static_cast<std::size_t>(p), 0);
  while (true) {
    for (long j = 0; j < p; ++j) cur[j] = -box + 2 * box * idx[static_cast<std::size_t>(j)] / (steps - 1);
    double v = penalized(d, f, cur, lambda, w);
    if (v < best_val) {
      best_val = v;
      best = cur;
    }
    long k = 0;
    while (k < p && ++idx[static_cast<std::size_t>(k)] == steps) idx[static_cast<std::size_t>(k++)] = 0;
    if (k == p) break;
  }
  Vector b = best;
  double step = 1.0;
  for (int it = 0; it < 200000; ++it) {
    Vector neg = independent_negative_gradient(d, f, b);
    double fb = penalized(d, f, b, lambda, Vector::Zero(p));
    Vector next(p);
    while (true) {
      for (long j = 0; j < p; ++j) {
        double u = b[j] + step * neg[j], t = step * lambda * w[j];
        next[j] = u > t ? u - t : u < -t ? u + t : 0.0;
      }
      Vector dlt = next - b;
      double fn = penalized(d, f, next, lambda, Vector::Zero(p));
      if (fn <= fb - neg.dot(dlt) + dlt.squaredNorm() / (2 * step) + 1e-15) break;
      step *= 0.5;
    }
    double move = (next - b).cwiseAbs().maxCoeff();
    b = next;
    step *= 1.5;
    if (move < 1e-13) break;
  }
  return b;
}

}  // namespace testing_support
