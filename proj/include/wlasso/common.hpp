#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace wlasso {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using IndexSet = std::vector<Index>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument values (negative t, non-symmetric matrix, bad sizes...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// exp() of a linear predictor would overflow.
class OverflowError : public Error {
 public:
  OverflowError(const std::string& what, Index row) : Error(what), row_(row) {}
  Index row() const { return row_; }

 private:
  Index row_;
};

// The penalized problem has no minimizer.
class UnboundedError : public Error {
 public:
  using Error::Error;
};

// A matrix block that must be inverted is singular.
class SingularError : public Error {
 public:
  using Error::Error;
};

// No tuning parameter satisfies the requested condition.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// Family does not support the requested mode (poisson has unbounded curvature).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Malformed input files.
class IngestionError : public Error {
 public:
  using Error::Error;
};

// Refusal to enumerate too many subsets.
class CombinatorialError : public Error {
 public:
  CombinatorialError(const std::string& what, double count) : Error(what), count_(count) {}
  double count() const { return count_; }

 private:
  double count_;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

// Complement of a sorted or unsorted index set within {0..p-1}, ascending.
inline IndexSet complement(const IndexSet& s, Index p) {
  std::vector<char> in(static_cast<std::size_t>(p), 0);
  for (Index j : s) {
    if (j < 0 || j >= p) throw DomainError("index " + std::to_string(j) + " out of range");
    in[static_cast<std::size_t>(j)] = 1;
  }
  IndexSet out;
  for (Index j = 0; j < p; ++j)
    if (!in[static_cast<std::size_t>(j)]) out.push_back(j);
  return out;
}

inline IndexSet support_of(const Vector& b) {
  IndexSet s;
  for (Index j = 0; j < b.size(); ++j)
    if (b[j] != 0.0) s.push_back(j);
  return s;
}

inline Vector gather(const Vector& v, const IndexSet& idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Index>(k)] = v[idx[k]];
  return out;
}

inline Matrix gather(const Matrix& m, const IndexSet& rows, const IndexSet& cols) {
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b)
      out(static_cast<Index>(a), static_cast<Index>(b)) = m(rows[a], cols[b]);
  return out;
}

inline double sign(double x) { return (x > 0.0) - (x < 0.0); }

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

inline double lq_norm(const Vector& v, double q) {
  if (std::isinf(q)) return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
  if (q == 1.0) return v.cwiseAbs().sum();
  if (q == 2.0) return v.norm();
  double s = 0.0;
  for (Index j = 0; j < v.size(); ++j) s += std::pow(std::abs(v[j]), q);
  return std::pow(s, 1.0 / q);
}

}  // namespace wlasso
