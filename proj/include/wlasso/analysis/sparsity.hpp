#pragma once

#include <wlasso/analysis/selection.hpp>
#include <wlasso/common.hpp>
#include <wlasso/glm.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>

namespace wlasso {

inline constexpr std::int64_t kUnboundedDimension = std::numeric_limits<std::int64_t>::max();

struct SparsityReport {
  double c_lower = 0.0;
  double c_upper = 0.0;
  Index d_star = 0;
  double alpha = 0.5;
  double eta = 0.0;
  std::int64_t d1 = 0;             // kUnboundedDimension when alpha = 1
  double src_cardinality_lhs = 0.0; // |S|/(2(1-alpha)) (e^{2 eta} c*/c- + 1 - alpha)
  bool src_cardinality_holds = false;
  bool src_verified = false;       // the eigenvalue sandwich was checked exhaustively
  std::optional<double> observed_c_lower;  // extreme sparse eigenvalues over A >= S, |A| = d*
  std::optional<double> observed_c_upper;
  bool src_holds = false;
  std::optional<bool> gradient_condition_holds;

  /** lambda_xi = (xi - 1) lambda / (xi + 1). */
  static double lambda_xi(double xi, double lambda) { return (xi - 1.0) * lambda / (xi + 1.0); }
};

inline double binomial(Index n, Index k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (Index i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(r);
}

// d1 = floor(|S|/(2(1-alpha)) (e^{2 eta} c*/c- - 1))
inline std::int64_t dimension_bound(Index s_size, double alpha, double eta, double c_lower, double c_upper) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0,1]");
  if (!(c_lower > 0.0) || !(c_upper >= c_lower)) throw DomainError("need c_upper >= c_lower > 0");
  if (alpha == 1.0) return kUnboundedDimension;
  const double v =
      static_cast<double>(s_size) / (2.0 * (1.0 - alpha)) * (std::exp(2.0 * eta) * c_upper / c_lower - 1.0);
  return static_cast<std::int64_t>(std::floor(v + 1e-12 * std::max(1.0, v)));
}

inline double src_cardinality_lhs(Index s_size, double alpha, double eta, double c_lower, double c_upper) {
  if (alpha == 1.0) return kInf;
  return static_cast<double>(s_size) / (2.0 * (1.0 - alpha)) *
         (std::exp(2.0 * eta) * c_upper / c_lower + 1.0 - alpha);
}

// Smallest d* satisfying the cardinality part of the SRC.
inline Index smallest_d_star(Index s_size, double alpha, double eta, double c_lower, double c_upper) {
  const double lhs = src_cardinality_lhs(s_size, alpha, eta, c_lower, c_upper);
  if (!std::isfinite(lhs)) throw InfeasibleError("no finite d* satisfies the SRC with alpha = 1");
  return static_cast<Index>(std::ceil(lhs - 1e-12 * lhs));
}

/** Visits every A = S + T with T a subset of S^c of size k, in lexicographic order. */
template <class Visit>
void for_each_superset(const IndexSet& support, Index p, Index k, Visit visit) {
  const IndexSet sc = complement(support, p);
  const Index m = static_cast<Index>(sc.size());
  if (k < 0 || k > m) return;
  std::vector<Index> pick(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) pick[static_cast<std::size_t>(i)] = i;
  while (true) {
    IndexSet a = support;
    for (Index i : pick) a.push_back(sc[static_cast<std::size_t>(i)]);
    std::sort(a.begin(), a.end());
    visit(a);
    Index i = k - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == m - k + i) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (Index j = i + 1; j < k; ++j) pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
}

/** Extreme eigenvalues of H_A over all A >= S with |A| = d*; refuses above cap subsets. */
inline std::pair<double, double> sparse_eigen_range(const Matrix& h, const IndexSet& support, Index d_star,
                                                    double cap = 1e6) {
  const Index p = h.rows(), s = static_cast<Index>(support.size());
  if (d_star < s || d_star > p) throw DomainError("d* must lie between |S| and p");
  const double count = binomial(p - s, d_star - s);
  if (count > cap)
    throw CombinatorialError("SRC verification needs " + std::to_string(static_cast<long long>(count)) +
                                 " subsets, above the cap",
                             count);
  double lo = kInf, hi = -kInf;
  for_each_superset(support, p, d_star - s, [&](const IndexSet& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(gather(h, a, a), Eigen::EigenvaluesOnly);
    lo = std::min(lo, es.eigenvalues()[0]);
    hi = std::max(hi, es.eigenvalues()[es.eigenvalues().size() - 1]);
  });
  return {lo, hi};
}

struct SrcCalibration {
  Index d_star = 0;
  double c_lower = 0.0;
  double c_upper = 0.0;
};

/** Smallest d* whose own extreme sparse eigenvalues satisfy the SRC cardinality inequality. */
inline SrcCalibration calibrate_src(const Matrix& h, const IndexSet& support, double alpha, double eta,
                                    double cap = 1e6) {
  const Index p = h.rows(), s = static_cast<Index>(support.size());
  for (Index d = s; d <= p; ++d) {
    auto [lo, hi] = sparse_eigen_range(h, support, d, cap);
    if (!(lo > 0.0)) break;
    if (src_cardinality_lhs(s, alpha, eta, lo, hi) <= static_cast<double>(d)) return {d, lo, hi};
  }
  throw InfeasibleError("no d* <= p satisfies the sparse Riesz condition");
}

struct GradientCondition {
  double lhs = kInf;   // max over A >= S, |A| <= d1 of |(Sigma*_A)^{-1/2} grad_A|_2
  double rhs = 0.0;    // e^{-eta} alpha lambda sqrt((d1 - |S|)/c*)
  bool exact = false;  // false: lhs is an upper bound through c-
  bool holds = false;
};

/**
 * The gradient condition for the dimension bound at the loss gradient g = grad l(beta*).
 * The quadratic form g_A' Sigma_A^{-1} g_A grows with A, so only |A| = min(d1, p) is visited.
 */
inline GradientCondition gradient_condition(const Matrix& sigma_star, const Vector& grad, const IndexSet& support,
                                            std::int64_t d1, double lambda, double alpha, double eta,
                                            double c_lower, double c_upper, double cap = 1e6) {
  GradientCondition out;
  const Index p = sigma_star.rows(), s = static_cast<Index>(support.size());
  if (d1 < s) return out;
  out.rhs = std::exp(-eta) * alpha * lambda * std::sqrt(static_cast<double>(d1 - s) / c_upper);
  const Index size = static_cast<Index>(std::min<std::int64_t>(d1, p));
  const double count = binomial(p - s, size - s);
  if (count <= cap) {
    out.exact = true;
    double worst = 0.0;
    for_each_superset(support, p, size - s, [&](const IndexSet& a) {
      Eigen::LDLT<Matrix> ldlt(gather(sigma_star, a, a));
      const Vector ga = gather(grad, a);
      double v = kInf;
      if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0.0).all())
        v = std::sqrt(std::max(ga.dot(ldlt.solve(ga)), 0.0));
      worst = std::max(worst, v);
    });
    out.lhs = worst;
  } else {
    // |g_A|^2 / c- with the largest off-support entries
    std::vector<double> off;
    std::vector<char> in(static_cast<std::size_t>(p), 0);
    double on = 0.0;
    for (Index j : support) {
      in[static_cast<std::size_t>(j)] = 1;
      on += grad[j] * grad[j];
    }
    for (Index j = 0; j < p; ++j)
      if (!in[static_cast<std::size_t>(j)]) off.push_back(grad[j] * grad[j]);
    std::sort(off.begin(), off.end(), std::greater<>());
    for (Index k = 0; k < size - s && k < static_cast<Index>(off.size()); ++k) on += off[static_cast<std::size_t>(k)];
    out.lhs = std::sqrt(on / c_lower);
  }
  out.holds = out.lhs <= out.rhs;
  return out;
}

/**
 * Dimension bound d1 and the SRC. With verify_src and p <= 20 the eigenvalue sandwich is
 * checked over every A >= S with |A| = d*; otherwise only the cardinality part is checked.
 */
inline SparsityReport src_and_dimension_bound(const Dataset& data, const GlmFamily& family, const Vector& beta_star,
                                              const IndexSet& support, double c_lower, double c_upper, Index d_star,
                                              double alpha, double eta, bool verify_src, double cap = 1e6) {
  if (!(eta > 0.0 && eta <= 1.0)) throw DomainError("eta must lie in (0,1]");
  if (beta_star.size() != data.p()) throw DomainError("beta_star length does not match p");
  SparsityReport rep;
  rep.c_lower = c_lower;
  rep.c_upper = c_upper;
  rep.d_star = d_star;
  rep.alpha = alpha;
  rep.eta = eta;
  const Index s = static_cast<Index>(support.size());
  rep.d1 = dimension_bound(s, alpha, eta, c_lower, c_upper);
  rep.src_cardinality_lhs = src_cardinality_lhs(s, alpha, eta, c_lower, c_upper);
  rep.src_cardinality_holds = rep.src_cardinality_lhs <= static_cast<double>(d_star);
  rep.src_holds = rep.src_cardinality_holds;
  if (verify_src && data.p() <= 20) {
    const Matrix h = detail::hessian_at(data, family, beta_star);
    auto [lo, hi] = sparse_eigen_range(h, support, std::min(d_star, data.p()), cap);
    rep.observed_c_lower = lo;
    rep.observed_c_upper = hi;
    rep.src_verified = true;
    rep.src_holds = rep.src_holds && c_lower <= lo * (1.0 + 1e-12) && hi <= c_upper * (1.0 + 1e-12);
  }
  return rep;
}

}  // namespace wlasso
