#pragma once

#include <wlasso/common.hpp>

#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <vector>

namespace wlasso {

struct QpResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  bool optimal = false;
};

/**
 * Primal active-set method for the strictly convex QP
 *   min x'Gx/2 + c'x  s.t.  Aeq x = beq,  Ain x >= bin,
 * started from a feasible x0. Small dense problems only.
 */
inline QpResult solve_qp(const Matrix& g, const Vector& c, const Matrix& aeq, const Vector& beq, const Matrix& ain,
                         const Vector& bin, const Vector& x0, int max_iterations = 500) {
  const Index n = g.rows(), meq = aeq.rows(), min_ = ain.rows();
  const double tol = 1e-12;
  QpResult out;
  Vector x = x0;
  std::vector<char> working(static_cast<std::size_t>(min_), 0);
  std::vector<Index> wset;

  // Seed the working set with active constraints that keep the rows independent.
  {
    Matrix rows(meq, n);
    rows = aeq;
    for (Index i = 0; i < min_; ++i) {
      if (std::abs(ain.row(i).dot(x) - bin[i]) > 1e-12) continue;
      Matrix trial(rows.rows() + 1, n);
      trial << rows, ain.row(i);
      Eigen::ColPivHouseholderQR<Matrix> qr(trial.transpose());
      if (qr.rank() == trial.rows()) {
        rows = trial;
        working[static_cast<std::size_t>(i)] = 1;
        wset.push_back(i);
      }
    }
  }

  for (int it = 0; it < max_iterations; ++it) {
    out.iterations = it + 1;
    const Index m = meq + static_cast<Index>(wset.size());
    Matrix kkt = Matrix::Zero(n + m, n + m);
    kkt.topLeftCorner(n, n) = g;
    Matrix aw(m, n);
    if (meq) aw.topRows(meq) = aeq;
    for (std::size_t k = 0; k < wset.size(); ++k) aw.row(meq + static_cast<Index>(k)) = ain.row(wset[k]);
    kkt.topRightCorner(n, m) = aw.transpose();
    kkt.bottomLeftCorner(m, n) = aw;
    Vector rhs = Vector::Zero(n + m);
    const Vector grad = g * x + c;
    rhs.head(n) = -grad;
    Vector sol = Eigen::FullPivLU<Matrix>(kkt).solve(rhs);
    Vector step = sol.head(n);
    if (step.cwiseAbs().maxCoeff() <= tol * (1.0 + x.cwiseAbs().maxCoeff())) {
      // multipliers of Ain x >= bin are -y
      double worst = 0.0;
      Index drop = -1;
      for (std::size_t k = 0; k < wset.size(); ++k) {
        double mu = -sol[n + meq + static_cast<Index>(k)];
        if (mu < worst) {
          worst = mu;
          drop = static_cast<Index>(k);
        }
      }
      if (drop < 0 || worst > -1e-12) {
        out.optimal = true;
        break;
      }
      working[static_cast<std::size_t>(wset[static_cast<std::size_t>(drop)])] = 0;
      wset.erase(wset.begin() + drop);
      continue;
    }
    double alpha = 1.0;
    Index block = -1;
    for (Index i = 0; i < min_; ++i) {
      if (working[static_cast<std::size_t>(i)]) continue;
      const double ap = ain.row(i).dot(step);
      if (ap < -1e-15) {
        const double a = (bin[i] - ain.row(i).dot(x)) / ap;
        if (a < alpha) {
          alpha = std::max(a, 0.0);
          block = i;
        }
      }
    }
    x += alpha * step;
    if (block >= 0) {
      working[static_cast<std::size_t>(block)] = 1;
      wset.push_back(block);
    }
  }
  out.x = x;
  out.value = 0.5 * x.dot(g * x) + c.dot(x);
  return out;
}

}  // namespace wlasso
