#pragma once

#include <wlasso/analysis/qp.hpp>
#include <wlasso/common.hpp>
#include <wlasso/rng.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace wlasso {

/** Cone {b : |W b_{S^c}|_1 <= xi |b_S|_1}; empty w_bound means unit weights. */
struct ConeSpec {
  double xi = 1.0;
  IndexSet support;
  Vector w_bound;
};

enum class FactorMethod { closed_form, exact_enumeration, multistart_search };

inline std::string to_string(FactorMethod m) {
  switch (m) {
    case FactorMethod::closed_form: return "closed_form";
    case FactorMethod::exact_enumeration: return "exact_enumeration";
    case FactorMethod::multistart_search: return "multistart_search";
  }
  return "?";
}

struct FactorValue {
  double value = kInf;        // attained by argmin; an upper bound on the infimum
  double lower_bound = 0.0;   // a valid lower bound on the infimum
  bool certified = false;     // value and lower_bound agree to tolerance
  FactorMethod method = FactorMethod::multistart_search;
  Vector argmin;
};

/** phi_q(b) = |b|_q / |S|^{1/q}, phi_1S(b) = |b_S|_1 / |S|. */
struct Phi {
  enum class Kind { lq, support_l1 };
  Kind kind = Kind::lq;
  double q = 2.0;

  static Phi lq(double q) {
    if (!(q >= 1.0)) throw DomainError("phi_q needs q >= 1");
    return {Kind::lq, q};
  }
  static Phi support_l1() { return {Kind::support_l1, 1.0}; }
  std::string label() const {
    if (kind == Kind::support_l1) return "phi_1S";
    if (std::isinf(q)) return "phi_inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "phi_%g", q);
    return buf;
  }
};

struct FactorOptions {
  Index enumeration_cap = 12;  // exact enumeration up to this p
  Index duality_cap = 9;       // dual lower bounds for F2 and F0(phi_2) up to this p
  int restarts = 64;
  int iterations = 500;
  std::uint64_t seed = 0x5eedULL;
  bool closed_form_identity = true;
  double certify_gap = 1e-9;
  unsigned threads = 0;
};

namespace cone_detail {

struct Geometry {
  Index p = 0;
  IndexSet s, sc;
  std::vector<char> in_s;
  Vector w;  // length p; only the S^c entries are used
  double xi = 1.0;
  double s_size() const { return static_cast<double>(s.size()); }
};

inline Geometry make_geometry(const Matrix& sigma, const ConeSpec& cone) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0) throw DomainError("Sigma must be a nonempty square matrix");
  if (!sigma.allFinite()) throw DomainError("Sigma has non-finite entries");
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw DomainError("Sigma is not symmetric");
  if (!(cone.xi > 0.0) || !std::isfinite(cone.xi)) throw DomainError("xi must be positive and finite");
  Geometry g;
  g.p = sigma.rows();
  g.xi = cone.xi;
  g.in_s.assign(static_cast<std::size_t>(g.p), 0);
  if (cone.support.empty()) throw DomainError("support must be nonempty");
  for (Index j : cone.support) {
    if (j < 0 || j >= g.p) throw DomainError("support index out of range");
    if (g.in_s[static_cast<std::size_t>(j)]) throw DomainError("support has repeated indices");
    g.in_s[static_cast<std::size_t>(j)] = 1;
  }
  for (Index j = 0; j < g.p; ++j) (g.in_s[static_cast<std::size_t>(j)] ? g.s : g.sc).push_back(j);
  if (cone.w_bound.size() == 0) g.w = Vector::Ones(g.p);
  else if (cone.w_bound.size() != g.p) throw DomainError("w_bound length does not match p");
  else g.w = cone.w_bound;
  for (Index j : g.sc)
    if (!(g.w[j] > 0.0) || !std::isfinite(g.w[j])) throw DomainError("w_bound must be positive and finite off the support");
  return g;
}

inline double l1_on(const Vector& b, const IndexSet& idx) {
  double a = 0.0;
  for (Index j : idx) a += std::abs(b[j]);
  return a;
}
inline double l2sq_on(const Vector& b, const IndexSet& idx) {
  double a = 0.0;
  for (Index j : idx) a += b[j] * b[j];
  return a;
}
inline double weighted_off(const Geometry& g, const Vector& b) {
  double a = 0.0;
  for (Index j : g.sc) a += g.w[j] * std::abs(b[j]);
  return a;
}

inline bool in_cone(const Geometry& g, const Vector& b, double rel = 1e-10) {
  const double s1 = l1_on(b, g.s);
  if (!(s1 > 0.0)) return false;
  return weighted_off(g, b) <= g.xi * s1 * (1.0 + rel);
}

inline bool is_identity(const Matrix& sigma) { return sigma == Matrix::Identity(sigma.rows(), sigma.cols()); }

inline double min_eigenvalue(const Matrix& sigma) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

// ---- ratio objectives on the cone ----

enum class Kind { kappa2, re2, f2, phi };

struct Ratio {
  Kind kind = Kind::kappa2;
  Phi phi;
};

inline double phi_value(const Geometry& g, const Phi& phi, const Vector& b) {
  if (phi.kind == Phi::Kind::support_l1) return l1_on(b, g.s) / g.s_size();
  if (std::isinf(phi.q)) return b.cwiseAbs().maxCoeff();
  return lq_norm(b, phi.q) / std::pow(g.s_size(), 1.0 / phi.q);
}

inline double ratio_value(const Matrix& sigma, const Geometry& g, const Ratio& r, const Vector& b) {
  const double s1 = l1_on(b, g.s);
  if (!(s1 > 0.0)) return kInf;
  const double q = std::max(b.dot(sigma * b), 0.0);
  switch (r.kind) {
    case Kind::kappa2: return g.s_size() * q / (s1 * s1);
    case Kind::re2: return q / b.squaredNorm();
    case Kind::f2: return q / (std::sqrt(l2sq_on(b, g.s)) * b.norm());
    case Kind::phi: return q / (s1 * phi_value(g, r.phi, b));
  }
  return kInf;
}

// Gradient of the log ratio; zero when the quadratic form vanishes.
inline Vector ratio_log_gradient(const Matrix& sigma, const Geometry& g, const Ratio& r, const Vector& b) {
  const Vector sb = sigma * b;
  const double q = b.dot(sb);
  Vector grad = Vector::Zero(g.p);
  if (!(q > 0.0)) return grad;
  grad = 2.0 * sb / q;
  const double s1 = l1_on(b, g.s);
  Vector ss = Vector::Zero(g.p);
  for (Index j : g.s) ss[j] = sign(b[j]);
  switch (r.kind) {
    case Kind::kappa2: grad -= 2.0 * ss / s1; break;
    case Kind::re2: grad -= 2.0 * b / b.squaredNorm(); break;
    case Kind::f2: {
      Vector bs = Vector::Zero(g.p);
      for (Index j : g.s) bs[j] = b[j];
      grad -= bs / bs.squaredNorm() + b / b.squaredNorm();
      break;
    }
    case Kind::phi: {
      grad -= ss / s1;
      if (r.phi.kind == Phi::Kind::support_l1) {
        grad -= ss / s1;
      } else if (std::isinf(r.phi.q)) {
        Index k = 0;
        b.cwiseAbs().maxCoeff(&k);
        grad[k] -= 1.0 / b[k];
      } else if (r.phi.q == 1.0) {
        grad -= b.unaryExpr([](double x) { return sign(x); }) / b.lpNorm<1>();
      } else {
        const double qq = r.phi.q, nq = std::pow(lq_norm(b, qq), qq);
        for (Index j = 0; j < g.p; ++j) grad[j] -= sign(b[j]) * std::pow(std::abs(b[j]), qq - 1.0) / nq;
      }
      break;
    }
  }
  return grad;
}

// ---- multistart projected search ----

// Returns log f(b) (infinite when undefined) and fills the gradient of log f when asked.
using LogObjective = std::function<double(const Vector&, Vector*)>;

// Euclidean projection onto the convex piece {s o b_S >= 0, |W b_Sc|_1 <= xi s'b_S}.
inline Vector project(const Geometry& g, const Vector& x, const Vector& s_signs) {
  const Index ns = static_cast<Index>(g.s.size());
  Vector u0(ns);
  for (Index i = 0; i < ns; ++i) u0[i] = s_signs[i] * x[g.s[static_cast<std::size_t>(i)]];
  auto excess = [&](double theta) {
    double off = 0.0, on = 0.0;
    for (Index j : g.sc) off += g.w[j] * std::max(std::abs(x[j]) - theta * g.w[j], 0.0);
    for (Index i = 0; i < ns; ++i) on += std::max(u0[i] + theta * g.xi, 0.0);
    return off - g.xi * on;
  };
  double theta = 0.0;
  if (excess(0.0) > 0.0) {
    double hi = 0.0;
    for (Index j : g.sc) hi = std::max(hi, std::abs(x[j]) / g.w[j]);
    double lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-16 * std::max(1.0, hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (excess(mid) > 0.0) lo = mid;
      else hi = mid;
    }
    theta = hi;
  }
  Vector out = Vector::Zero(g.p);
  for (Index i = 0; i < ns; ++i) out[g.s[static_cast<std::size_t>(i)]] = s_signs[i] * std::max(u0[i] + theta * g.xi, 0.0);
  for (Index j : g.sc) out[j] = soft_threshold(x[j], theta * g.w[j]);
  return out;
}

struct SearchOutcome {
  double log_value = kInf;
  Vector argmin;
};

inline SearchOutcome local_descent(const Geometry& g, const LogObjective& f, const Vector& start, int iterations) {
  SearchOutcome out;
  Vector s_signs(static_cast<Index>(g.s.size()));
  for (std::size_t i = 0; i < g.s.size(); ++i) s_signs[static_cast<Index>(i)] = start[g.s[i]] < 0.0 ? -1.0 : 1.0;
  Vector b = project(g, start, s_signs);
  if (!(l1_on(b, g.s) > 0.0)) return out;
  b.normalize();
  Vector grad;
  double val = f(b, &grad);
  if (!std::isfinite(val)) return out;
  double step = 0.1;
  for (int it = 0; it < iterations && step > 1e-12; ++it) {
    bool moved = false;
    while (step > 1e-12) {
      Vector cand = project(g, b - step * grad, s_signs);
      const double nrm = cand.norm();
      if (l1_on(cand, g.s) > 0.0 && nrm > 0.0) {
        cand /= nrm;
        Vector cg;
        const double cv = f(cand, &cg);
        if (cv < val) {
          const bool tiny = val - cv <= 1e-15 * std::max(1.0, std::abs(val));
          b = cand;
          val = cv;
          grad = cg;
          step *= 2.0;
          moved = !tiny;
          break;
        }
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  out.log_value = val;
  out.argmin = b;
  return out;
}

inline SearchOutcome multistart(const Geometry& g, const LogObjective& f, const std::vector<Vector>& seeds,
                                const FactorOptions& opts) {
  std::vector<Vector> starts = seeds;
  Philox4x32 rng(opts.seed, kSearchStream);
  for (int r = 0; r < opts.restarts; ++r) {
    Vector b(g.p);
    const double spread = 2.0 * rng.uniform();
    for (Index j = 0; j < g.p; ++j) b[j] = rng.normal() * (g.in_s[static_cast<std::size_t>(j)] ? 1.0 : spread);
    starts.push_back(b);
  }
  std::vector<SearchOutcome> slot(starts.size());
  parallel_for(starts.size(), [&](std::size_t k) { slot[k] = local_descent(g, f, starts[k], opts.iterations); },
               opts.threads);
  SearchOutcome best;
  for (auto& s : slot)
    if (s.log_value < best.log_value) best = s;
  return best;
}

inline LogObjective ratio_objective(const Matrix& sigma, const Geometry& g, const Ratio& r) {
  return [&sigma, &g, r](const Vector& b, Vector* grad) {
    const double v = ratio_value(sigma, g, r, b);
    if (grad) *grad = ratio_log_gradient(sigma, g, r, b);
    return v > 0.0 ? std::log(v) : -kInf;
  };
}

inline std::vector<Vector> default_seeds(const Matrix& sigma, const Geometry& g) {
  std::vector<Vector> seeds;
  Vector ones = Vector::Zero(g.p);
  for (Index j : g.s) {
    Vector e = Vector::Zero(g.p);
    e[j] = 1.0;
    seeds.push_back(e);
    ones[j] = 1.0;
  }
  seeds.push_back(ones);
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
  seeds.push_back(es.eigenvectors().col(0));
  return seeds;
}

// ---- orthant enumeration with convex quadratic subproblems ----

// Calls visit(signs) for every sign pattern on R^p with the first support sign fixed to +1.
template <class Visit>
void for_each_orthant(const Geometry& g, Visit visit) {
  IndexSet free;
  for (Index j = 0; j < g.p; ++j)
    if (j != g.s.front()) free.push_back(j);
  const std::uint64_t count = std::uint64_t{1} << free.size();
  for (std::uint64_t m = 0; m < count; ++m) {
    Vector signs = Vector::Ones(g.p);
    for (std::size_t k = 0; k < free.size(); ++k)
      if (m >> k & 1u) signs[free[k]] = -1.0;
    visit(signs);
  }
}

// Feasible set in orthant coordinates y >= 0: sum_S y = 1, sum_Sc w y <= xi.
struct OrthantConstraints {
  Matrix aeq, ain;
  Vector beq, bin, y0;
  explicit OrthantConstraints(const Geometry& g) {
    aeq = Matrix::Zero(1, g.p);
    for (Index j : g.s) aeq(0, j) = 1.0;
    beq = Vector::Ones(1);
    ain = Matrix::Zero(g.p + 1, g.p);
    ain.topRows(g.p).setIdentity();
    for (Index j : g.sc) ain(g.p, j) = -g.w[j];
    bin = Vector::Zero(g.p + 1);
    bin[g.p] = -g.xi;
    y0 = Vector::Zero(g.p);
    for (Index j : g.s) y0[j] = 1.0 / g.s_size();
  }
};

inline double ridge_for(const Matrix& sigma) { return 1e-13 * std::max(1.0, sigma.diagonal().cwiseAbs().maxCoeff()); }

// min y'Hy / (d0 + d'y) over the orthant feasible set by Dinkelbach iterations.
inline std::pair<double, Vector> dinkelbach(const Matrix& h, double d0, const Vector& d, const OrthantConstraints& c,
                                            const Vector& start, double ridge) {
  Vector y = start;
  auto ratio = [&](const Vector& v) { return v.dot(h * v) / (d0 + d.dot(v)); };
  double mu = ratio(y);
  const Matrix gmat = 2.0 * h + 2.0 * ridge * Matrix::Identity(h.rows(), h.cols());
  for (int it = 0; it < 100; ++it) {
    QpResult r = solve_qp(gmat, -mu * d, c.aeq, c.beq, c.ain, c.bin, y);
    const double den = d0 + d.dot(r.x);
    const double gap = r.x.dot(h * r.x) - mu * den;
    if (!(den > 0.0) || gap >= -1e-15 * std::max(1.0, std::abs(mu))) break;
    y = r.x;
    mu = ratio(y);
  }
  return {mu, y};
}

struct Enumerated {
  double value = kInf;
  Vector argmin;
};

// kappa*^2 exactly: |S| min y'Hy over each orthant.
inline Enumerated kappa2_enumeration(const Matrix& sigma, const Geometry& g) {
  OrthantConstraints c(g);
  const double ridge = ridge_for(sigma);
  Enumerated best;
  for_each_orthant(g, [&](const Vector& signs) {
    const Matrix h = signs.asDiagonal() * sigma * signs.asDiagonal();
    const Matrix gmat = 2.0 * h + 2.0 * ridge * Matrix::Identity(g.p, g.p);
    QpResult r = solve_qp(gmat, Vector::Zero(g.p), c.aeq, c.beq, c.ain, c.bin, c.y0);
    const double v = g.s_size() * std::max(r.x.dot(h * r.x), 0.0);
    if (v < best.value) {
      best.value = v;
      best.argmin = signs.cwiseProduct(r.x);
    }
  });
  return best;
}

// F0 for phi_1 and phi_inf through fractional programs on each orthant.
inline Enumerated phi_enumeration(const Matrix& sigma, const Geometry& g, double q) {
  OrthantConstraints c(g);
  const double ridge = ridge_for(sigma);
  Enumerated best;
  for_each_orthant(g, [&](const Vector& signs) {
    const Matrix h = signs.asDiagonal() * sigma * signs.asDiagonal();
    auto keep = [&](double v, const Vector& y) {
      if (v < best.value) {
        best.value = v;
        best.argmin = signs.cwiseProduct(y);
      }
    };
    if (q == 1.0) {
      Vector d = Vector::Zero(g.p);
      for (Index j : g.sc) d[j] = 1.0;
      auto [mu, y] = dinkelbach(h, 1.0, d, c, c.y0, ridge);
      keep(g.s_size() * mu, y);
    } else {
      for (Index k = 0; k < g.p; ++k) {
        Vector d = Vector::Zero(g.p);
        d[k] = 1.0;
        Vector y = c.y0;
        if (!g.in_s[static_cast<std::size_t>(k)]) y[k] = g.xi / g.w[k];
        auto [mu, yy] = dinkelbach(h, 0.0, d, c, y, ridge);
        keep(mu, yy);
      }
    }
  });
  return best;
}

// ---- face enumeration with generalized eigenproblems ----

enum class Pencil { re2, f2_dual, phi2_dual };

inline std::pair<double, Vector> min_pencil(const Matrix& a, const Matrix& m) {
  if (a.rows() == 1) return {a(0, 0) / m(0, 0), Vector::Ones(1)};
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(a, m);
  return {es.eigenvalues()[0], es.eigenvectors().col(0)};
}

// True objective of the pencil family at b: q / denominator.
inline double pencil_objective(const Matrix& sigma, const Geometry& g, Pencil kind, double t, const Vector& b) {
  const double q = std::max(b.dot(sigma * b), 0.0);
  switch (kind) {
    case Pencil::re2: return q / b.squaredNorm();
    case Pencil::f2_dual: return q / (t * l2sq_on(b, g.s) + b.squaredNorm() / t);
    case Pencil::phi2_dual: {
      const double s1 = l1_on(b, g.s);
      return q / (t * s1 * s1 + b.squaredNorm() / t);
    }
  }
  return kInf;
}

/**
 * Minimum over the cone of b'Sigma b / b'D b by visiting every face of every polyhedral piece:
 * supports N meeting S, with or without the cone constraint active.
 */
inline Enumerated face_enumeration(const Matrix& sigma, const Geometry& g, Pencil kind, double t = 1.0) {
  Enumerated best;
  const bool sign_dependent = kind == Pencil::phi2_dual;
  const std::uint64_t total = std::uint64_t{1} << g.p;
  auto consider = [&](const IndexSet& n_idx, const Vector& v) {
    Vector b = Vector::Zero(g.p);
    for (std::size_t k = 0; k < n_idx.size(); ++k) b[n_idx[k]] = v[static_cast<Index>(k)];
    if (!in_cone(g, b)) return;
    const double val = pencil_objective(sigma, g, kind, t, b);
    if (val < best.value) {
      best.value = val;
      best.argmin = b / b.norm();
    }
  };
  for (std::uint64_t mask = 1; mask < total; ++mask) {
    IndexSet n_idx, ns_pos, nc_pos;
    for (Index j = 0; j < g.p; ++j) {
      if (!(mask >> j & 1u)) continue;
      (g.in_s[static_cast<std::size_t>(j)] ? ns_pos : nc_pos).push_back(static_cast<Index>(n_idx.size()));
      n_idx.push_back(j);
    }
    if (ns_pos.empty()) continue;
    const Index m = static_cast<Index>(n_idx.size());
    const Matrix a = gather(sigma, n_idx, n_idx);
    auto denom = [&](const Vector& s_on_ns) {
      Matrix d = Matrix::Identity(m, m);
      if (kind == Pencil::f2_dual) {
        d /= t;
        for (Index pos : ns_pos) d(pos, pos) += t;
      } else if (kind == Pencil::phi2_dual) {
        d /= t;
        Vector s = Vector::Zero(m);
        for (std::size_t k = 0; k < ns_pos.size(); ++k) s[ns_pos[k]] = s_on_ns[static_cast<Index>(k)];
        d += t * s * s.transpose();
      }
      return d;
    };
    const std::uint64_t s_count = std::uint64_t{1} << (ns_pos.size() - 1);
    std::vector<double> face_floor(static_cast<std::size_t>(sign_dependent ? s_count : 1));
    auto signs_of = [&](std::uint64_t sm) {
      Vector s = Vector::Ones(static_cast<Index>(ns_pos.size()));
      for (std::size_t k = 1; k < ns_pos.size(); ++k)
        if (sm >> (k - 1) & 1u) s[static_cast<Index>(k)] = -1.0;
      return s;
    };
    // faces with the cone constraint inactive span R^N
    for (std::size_t k = 0; k < face_floor.size(); ++k) {
      auto [lam, v] = min_pencil(a, denom(signs_of(k)));
      face_floor[k] = lam;
      consider(n_idx, v);
    }
    if (nc_pos.empty()) continue;
    const std::uint64_t t_count = std::uint64_t{1} << nc_pos.size();
    for (std::uint64_t sm = 0; sm < s_count; ++sm) {
      if (face_floor[sign_dependent ? sm : 0] >= best.value) continue;
      const Vector s = signs_of(sm);
      const Matrix d = denom(s);
      for (std::uint64_t tm = 0; tm < t_count; ++tm) {
        Vector normal = Vector::Zero(m);
        for (std::size_t k = 0; k < ns_pos.size(); ++k) normal[ns_pos[k]] = g.xi * s[static_cast<Index>(k)];
        for (std::size_t k = 0; k < nc_pos.size(); ++k) {
          const double tk = (tm >> k & 1u) ? -1.0 : 1.0;
          normal[nc_pos[k]] = -g.w[n_idx[static_cast<std::size_t>(nc_pos[k])]] * tk;
        }
        const Matrix normal_col = normal;
        Eigen::HouseholderQR<Matrix> qr(normal_col);
        const Matrix basis = (qr.householderQ() * Matrix::Identity(m, m)).rightCols(m - 1);
        auto [lam, x] = min_pencil(basis.transpose() * a * basis, basis.transpose() * d * basis);
        (void)lam;
        consider(n_idx, basis * x);
      }
    }
  }
  return best;
}

// ---- dual lower bounds for the F2-type factors ----

struct DualBound {
  double lower = 0.0;
  double upper = kInf;
  Vector argmin;
};

/**
 * For each t > 0, 2 G(t) with G(t) = min over the cone of b'Sigma b / (t a(b)^2 + |b|^2/t)
 * is a lower bound on min b'Sigma b / (a(b)|b|), where a(b) = |b_S|_2 (F2) or |b_S|_1 (phi_2).
 */
inline DualBound dual_bound(const Matrix& sigma, const Geometry& g, bool phi2, const Ratio& ratio,
                            const std::vector<Vector>& candidates) {
  const double scale = phi2 ? std::sqrt(g.s_size()) : 1.0;
  const Pencil kind = phi2 ? Pencil::phi2_dual : Pencil::f2_dual;
  DualBound out;
  auto offer = [&](const Vector& b) {
    if (b.size() == 0) return;
    const double v = ratio_value(sigma, g, ratio, b);
    if (v < out.upper) {
      out.upper = v;
      out.argmin = b / b.norm();
    }
  };
  for (auto& c : candidates) offer(c);
  auto t_of = [&](const Vector& b) {
    const double a = phi2 ? l1_on(b, g.s) : std::sqrt(l2sq_on(b, g.s));
    return a > 0.0 ? b.norm() / a : 1.0;
  };
  double best_t = out.argmin.size() ? t_of(out.argmin) : 1.0;
  auto eval = [&](double t) {
    Enumerated e = face_enumeration(sigma, g, kind, t);
    offer(e.argmin);
    const double lb = 2.0 * e.value * scale;
    if (lb > out.lower) {
      out.lower = lb;
      best_t = t;
    }
    return std::make_pair(lb, e.argmin);
  };
  double t = best_t;
  for (int it = 0; it < 8; ++it) {
    auto [lb, b] = eval(t);
    (void)lb;
    if (b.size() == 0) break;
    const double next = t_of(b);
    if (std::abs(std::log(next / t)) < 1e-10) break;
    t = next;
  }
  // golden-section refinement in log t
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = std::log(best_t) - 1.0, hi = std::log(best_t) + 1.0;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = eval(std::exp(x1)).first, f2 = eval(std::exp(x2)).first;
  for (int it = 0; it < 30 && hi - lo > 1e-7; ++it) {
    if (f1 >= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = eval(std::exp(x1)).first;
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = eval(std::exp(x2)).first;
    }
  }
  return out;
}

}  // namespace cone_detail

/**
 * Invertibility factors of one (Sigma, cone) pair. Results are cached so that the chain
 * kappa*, RE2, F2, F0 shares the enumeration work.
 */
class ConeFactors {
 public:
  ConeFactors(Matrix sigma, ConeSpec cone, FactorOptions opts = {})
      : sigma_(std::move(sigma)), cone_(std::move(cone)), opts_(opts), g_(cone_detail::make_geometry(sigma_, cone_)) {
    const double lam = cone_detail::min_eigenvalue(sigma_);
    if (lam < -1e-10 * std::max(1.0, sigma_.diagonal().cwiseAbs().maxCoeff()))
      throw DomainError("Sigma must be nonnegative definite");
    lambda_min_ = std::max(lam, 0.0);
    identity_ = opts_.closed_form_identity && cone_detail::is_identity(sigma_);
  }

  const Matrix& sigma() const { return sigma_; }
  const ConeSpec& cone() const { return cone_; }
  const cone_detail::Geometry& geometry() const { return g_; }
  bool enumerates() const { return g_.p <= opts_.enumeration_cap; }
  double lambda_min() const { return lambda_min_; }

  /** kappa*(xi,S) = inf sqrt(|S| b'Sigma b)/|b_S|_1. */
  const FactorValue& kappa_star() {
    if (!kappa_) {
      FactorValue sq = kappa_squared();
      kappa_ = FactorValue{std::sqrt(sq.value), std::sqrt(std::max(sq.lower_bound, 0.0)), sq.certified, sq.method,
                           sq.argmin};
    }
    return *kappa_;
  }

  /** RE2(xi,S) = inf sqrt(b'Sigma b)/|b|_2. */
  const FactorValue& re2() {
    if (!re2_) {
      FactorValue sq = re2_squared();
      re2_ = FactorValue{std::sqrt(sq.value), std::sqrt(std::max(sq.lower_bound, 0.0)), sq.certified, sq.method,
                         sq.argmin};
    }
    return *re2_;
  }

  /** F2(xi,S) = inf b'Sigma b/(|b_S|_2 |b|_2). */
  const FactorValue& f2() {
    if (f2_) return *f2_;
    using namespace cone_detail;
    const Ratio ratio{Kind::f2, {}};
    if (identity_) return *(f2_ = closed_form());
    if (!enumerates()) return *(f2_ = searched(ratio, lambda_min_));
    const FactorValue& re = re2_squared();
    const FactorValue& ka = kappa_squared();
    f2_ = dual_or_product(false, ratio, re.lower_bound, {re.argmin, ka.argmin});
    return *f2_;
  }

  /** F0(xi,S;phi) = inf b'Sigma b/(|b_S|_1 phi(b)). */
  FactorValue f0(const Phi& phi) {
    using namespace cone_detail;
    const std::string key = phi.label();
    for (auto& [k, v] : f0_cache_)
      if (k == key) return v;
    FactorValue out = compute_f0(phi);
    f0_cache_.emplace_back(key, out);
    return out;
  }

 private:
  FactorValue closed_form() const {
    FactorValue v{1.0, 1.0, true, FactorMethod::closed_form, Vector::Zero(g_.p)};
    for (Index j : g_.s) v.argmin[j] = 1.0 / std::sqrt(g_.s_size());
    return v;
  }

  FactorValue searched(const cone_detail::Ratio& ratio, double lower, std::vector<Vector> seeds = {}) const {
    using namespace cone_detail;
    auto base = default_seeds(sigma_, g_);
    seeds.insert(seeds.end(), base.begin(), base.end());
    SearchOutcome s = multistart(g_, ratio_objective(sigma_, g_, ratio), seeds, opts_);
    FactorValue v;
    v.value = std::exp(s.log_value);
    v.lower_bound = std::min(lower, v.value);
    v.method = FactorMethod::multistart_search;
    v.argmin = s.argmin;
    v.certified = v.value - v.lower_bound <= opts_.certify_gap * v.value + 1e-14;
    return v;
  }

  FactorValue enumerated(double value, const Vector& argmin) const {
    return FactorValue{value, std::max(value * (1.0 - 1e-9) - 1e-14, 0.0), true, FactorMethod::exact_enumeration,
                       argmin.size() ? Vector(argmin / argmin.norm()) : argmin};
  }

  const FactorValue& kappa_squared() {
    using namespace cone_detail;
    if (kappa2_) return *kappa2_;
    if (identity_) return *(kappa2_ = closed_form());
    if (!enumerates()) return *(kappa2_ = searched({Kind::kappa2, {}}, lambda_min_));
    Enumerated e = kappa2_enumeration(sigma_, g_);
    return *(kappa2_ = enumerated(e.value, e.argmin));
  }

  const FactorValue& re2_squared() {
    using namespace cone_detail;
    if (re2sq_) return *re2sq_;
    if (identity_) return *(re2sq_ = closed_form());
    if (!enumerates()) return *(re2sq_ = searched({Kind::re2, {}}, lambda_min_));
    Enumerated e = face_enumeration(sigma_, g_, Pencil::re2);
    return *(re2sq_ = enumerated(e.value, e.argmin));
  }

  FactorValue dual_or_product(bool phi2, const cone_detail::Ratio& ratio, double product_lower,
                              std::vector<Vector> candidates) const {
    using namespace cone_detail;
    FactorValue v;
    v.method = FactorMethod::exact_enumeration;
    double lower = product_lower;
    double upper = kInf;
    Vector arg;
    if (g_.p <= opts_.duality_cap) {
      DualBound d = dual_bound(sigma_, g_, phi2, ratio, candidates);
      lower = std::max(lower, d.lower);
      upper = d.upper;
      arg = d.argmin;
      if (arg.size()) candidates.push_back(arg);
    }
    // polish the attained value from every candidate
    FactorOptions local = opts_;
    local.restarts = 0;
    SearchOutcome s = multistart(g_, ratio_objective(sigma_, g_, ratio), candidates, local);
    if (std::exp(s.log_value) < upper) {
      upper = std::exp(s.log_value);
      arg = s.argmin;
    }
    v.value = upper;
    v.lower_bound = std::min(lower, upper);
    v.argmin = arg;
    v.certified = upper - v.lower_bound <= opts_.certify_gap * upper + 1e-14;
    return v;
  }

  FactorValue compute_f0(const Phi& phi) {
    using namespace cone_detail;
    const double s = g_.s_size();
    const Ratio ratio{Kind::phi, phi};
    if (phi.kind == Phi::Kind::support_l1) return kappa_squared();
    const double q = phi.q;
    if (identity_ && q == 2.0) return closed_form();
    if (!enumerates()) {
      // |b|_q <= |b|_1 <= (1 + xi/min w)|b_S|_1 <= (1 + xi/min w) sqrt|S| |b|_2
      double wmin = kInf;
      for (Index j : g_.sc) wmin = std::min(wmin, g_.w[j]);
      const double spread = g_.sc.empty() ? 1.0 : 1.0 + g_.xi / wmin;
      double lower = lambda_min_ * (std::isinf(q) ? 1.0 : std::pow(s, 1.0 / q)) / (spread * s);
      if (q >= 2.0) lower = std::max(lower, lambda_min_ * (std::isinf(q) ? 1.0 : std::pow(s, 1.0 / q)) / std::sqrt(s));
      return searched(ratio, lower);
    }
    if (q == 1.0 || std::isinf(q)) {
      Enumerated e = phi_enumeration(sigma_, g_, q);
      return enumerated(e.value, e.argmin);
    }
    if (q == 2.0) {
      const FactorValue& ka = kappa_star();
      const FactorValue& re = re2();
      return dual_or_product(true, ratio, ka.lower_bound * re.lower_bound, {ka.argmin, re.argmin});
    }
    // other q: norm comparisons against phi_1 or phi_2
    FactorValue anchor = q < 2.0 ? f0(Phi::lq(1.0)) : f0(Phi::lq(2.0));
    const double lower =
        q < 2.0 ? anchor.lower_bound / std::pow(s, 1.0 - 1.0 / q) : anchor.lower_bound / std::pow(s, 0.5 - 1.0 / q);
    FactorValue v = searched(ratio, lower, {anchor.argmin, kappa_star().argmin});
    v.method = FactorMethod::exact_enumeration;
    return v;
  }

  Matrix sigma_;
  ConeSpec cone_;
  FactorOptions opts_;
  cone_detail::Geometry g_;
  double lambda_min_ = 0.0;
  bool identity_ = false;
  std::optional<FactorValue> kappa2_, kappa_, re2sq_, re2_, f2_;
  std::vector<std::pair<std::string, FactorValue>> f0_cache_;
};

inline FactorValue compatibility_constant(const Matrix& sigma, const ConeSpec& cone, const FactorOptions& opts = {}) {
  return ConeFactors(sigma, cone, opts).kappa_star();
}
inline FactorValue restricted_eigenvalue(const Matrix& sigma, const ConeSpec& cone, const FactorOptions& opts = {}) {
  return ConeFactors(sigma, cone, opts).re2();
}
inline FactorValue simple_gif(const Matrix& sigma, const ConeSpec& cone, const Phi& phi, const FactorOptions& opts = {}) {
  return ConeFactors(sigma, cone, opts).f0(phi);
}
inline FactorValue f2_factor(const Matrix& sigma, const ConeSpec& cone, const FactorOptions& opts = {}) {
  return ConeFactors(sigma, cone, opts).f2();
}

struct InvertibilityReport {
  FactorValue kappa_star;
  FactorValue re2;
  FactorValue f2;
  std::vector<std::pair<Phi, FactorValue>> f0_by_phi;
  std::optional<FactorValue> f_star_glm;
  std::optional<FactorValue> f_lower_glm;
  FactorMethod method = FactorMethod::exact_enumeration;
  bool certified_lower_bound = false;
};

inline InvertibilityReport invertibility_report(const Matrix& sigma, const ConeSpec& cone, const std::vector<Phi>& phis,
                                                const FactorOptions& opts = {}) {
  ConeFactors cf(sigma, cone, opts);
  InvertibilityReport r;
  r.kappa_star = cf.kappa_star();
  r.re2 = cf.re2();
  r.f2 = cf.f2();
  for (const Phi& phi : phis) r.f0_by_phi.emplace_back(phi, cf.f0(phi));
  r.method = cf.enumerates() ? FactorMethod::exact_enumeration : FactorMethod::multistart_search;
  r.certified_lower_bound = r.kappa_star.certified && r.re2.certified && r.f2.certified;
  for (auto& [phi, v] : r.f0_by_phi) r.certified_lower_bound = r.certified_lower_bound && v.certified;
  return r;
}

}  // namespace wlasso
