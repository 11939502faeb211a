#pragma once

#include <wlasso/analysis/cone.hpp>
#include <wlasso/analysis/glm_gif.hpp>
#include <wlasso/analysis/noise.hpp>
#include <wlasso/analysis/selection.hpp>
#include <wlasso/analysis/sparsity.hpp>
#include <wlasso/bench/config.hpp>
#include <wlasso/bench/data.hpp>
#include <wlasso/bench/report.hpp>
#include <wlasso/multistage.hpp>
#include <wlasso/solver.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace wlasso::bench {

// Slack on bound flags for the solver's finite KKT tolerance.
inline constexpr double kBoundSlack = 1e-7;

inline bool within(double value, double bound) { return value <= bound + kBoundSlack * std::max(1.0, std::abs(bound)); }

/** Shared state of an experiment: fixed design, target and calibrated noise level. */
struct Setup {
  ExperimentConfig cfg;
  GlmFamily family;
  Matrix x;
  Vector beta_star;
  IndexSet support;
  Dataset file_data;  // replicate data for from_file designs with their own response
  bool has_file_response = false;
  PenaltyLevel level;

  Index n() const { return x.rows(); }
  Index p() const { return x.cols(); }
  Dataset replicate(std::uint64_t k) const {
    if (has_file_response) return file_data;
    return draw_replicate(cfg, x, beta_star, k);
  }
  Matrix sigma() const { return sigma_star_matrix(Dataset(x, Vector::Zero(x.rows())), family, beta_star); }
  FactorOptions factor_options() const {
    FactorOptions o;
    o.enumeration_cap = cfg.enumeration_cap;
    o.restarts = cfg.search_restarts;
    o.seed = cfg.seed;
    return o;
  }
};

/** Noise level lambda0 = lambda1 from the score tail bound at eps0. */
inline PenaltyLevel calibrated_level(const ExperimentConfig& cfg, const GlmFamily& family, const Matrix& x,
                                     const Vector& beta_star) {
  const Dataset d(x, Vector::Zero(x.rows()));
  DataSummary s = DataSummary::of(d, family.sigma());
  if (std::isfinite(family.c0)) return penalty_level(family, s, cfg.eps0, BoundedCurvature{});
  s.sigma_star_diag = sigma_star_matrix(d, family, beta_star).diagonal();
  return penalty_level(family, s, cfg.eps0, CurvatureFree{cfg.eta > 0.0 ? cfg.eta : 0.5, family.m1});
}

inline Setup make_setup(const ExperimentConfig& cfg) {
  cfg.validate();
  Setup s;
  s.cfg = cfg;
  s.family = cfg.glm_family();
  s.x = make_design(cfg);
  s.beta_star = make_target(cfg, s.x.cols());
  for (Index j = 0; j < cfg.s0_size; ++j) s.support.push_back(j);
  if (cfg.design.kind == DesignKind::from_file &&
      (cfg.experiment == Experiment::fit || cfg.experiment == Experiment::path)) {
    Dataset file = ingest_csv(cfg.design.path, cfg.design.header);
    s.file_data = Dataset(s.x, file.y());
    s.has_file_response = true;
  }
  s.level = calibrated_level(cfg, s.family, s.x, s.beta_star);
  return s;
}

// lambda with xi_eff <= xi whenever z0, z1 <= lambda0 and w = 1: (xi+1)/(xi-1) lambda0.
inline double default_lambda(const Setup& s) {
  if (s.cfg.lambda) return *s.cfg.lambda;
  if (!(s.cfg.xi > 1.0)) throw DomainError("lambda auto needs xi > 1");
  return (s.cfg.xi + 1.0) / (s.cfg.xi - 1.0) * s.level.lambda0;
}

struct ErrorMetrics {
  double l1 = 0.0, l2 = 0.0, linf = 0.0;
  Index active = 0, false_positives = 0, false_negatives = 0;
  bool sign_recovery = false;
  double off_support_l1 = 0.0;
};

inline ErrorMetrics error_metrics(const Vector& beta_hat, const Vector& beta_star, const IndexSet& support) {
  ErrorMetrics m;
  const Vector h = beta_hat - beta_star;
  m.l1 = h.lpNorm<1>();
  m.l2 = h.norm();
  m.linf = h.size() ? h.lpNorm<Eigen::Infinity>() : 0.0;
  std::vector<char> in(static_cast<std::size_t>(h.size()), 0);
  for (Index j : support) in[static_cast<std::size_t>(j)] = 1;
  m.sign_recovery = true;
  for (Index j = 0; j < h.size(); ++j) {
    const bool nz = beta_hat[j] != 0.0;
    m.active += nz;
    if (!in[static_cast<std::size_t>(j)]) {
      m.false_positives += nz;
      m.off_support_l1 += std::abs(h[j]);
    } else if (!nz) {
      ++m.false_negatives;
    }
    m.sign_recovery = m.sign_recovery && sign(beta_hat[j]) == sign(beta_star[j]);
  }
  return m;
}

namespace detail {

using Row = std::vector<Value>;

// Runs body(k, row) for every replicate; a throwing replicate keeps its index and error text.
inline void run_replicates(Report& r, const Setup& s, const std::function<void(std::uint64_t, Row&)>& body) {
  const std::size_t reps = static_cast<std::size_t>(s.cfg.replicates);
  const std::size_t width = r.columns.size();
  r.rows.assign(reps, Row(width));
  parallel_for(
      reps,
      [&](std::size_t k) {
        Row& row = r.rows[k];
        row[0] = count(static_cast<std::int64_t>(k));
        row[1] = std::string();
        try {
          body(k, row);
        } catch (const std::exception& e) {
          row.assign(width, Value());
          row[0] = count(static_cast<std::int64_t>(k));
          row[1] = std::string(e.what());
        }
      },
      s.cfg.threads);
}

inline std::int64_t count_where(const Report& r, const std::function<bool(const Row&)>& pred) {
  std::int64_t c = 0;
  for (const auto& row : r.rows) c += pred(row);
  return c;
}

inline bool is_true(const Value& v) {
  auto b = std::get_if<bool>(&v);
  return b && *b;
}
inline bool is_false(const Value& v) {
  auto b = std::get_if<bool>(&v);
  return b && !*b;
}
inline bool failed(const Row& row) { return !std::get<std::string>(row[1]).empty(); }

inline Report start(const Setup& s, std::vector<std::string> columns) {
  Report r;
  r.experiment = to_string(s.cfg.experiment);
  r.config = config_fields(s.cfg);
  r.columns = {"replicate", "error"};
  r.columns.insert(r.columns.end(), columns.begin(), columns.end());
  return r;
}

inline void finish(Report& r, const Setup& s, const Fields& extra) {
  r.aggregates = summarize(r);
  r.aggregates.emplace_back("failed_replicates", count(count_where(r, failed)));
  r.aggregates.emplace_back("lambda0", s.level.lambda0);
  r.aggregates.emplace_back("lambda1", s.level.lambda1);
  for (const auto& f : extra) r.aggregates.push_back(f);
}

inline bool is_certified(const FactorValue& f) { return f.method != FactorMethod::multistart_search; }

inline double noise_event_floor(double eps0, int reps) {
  return 1.0 - eps0 - 2.0 * std::sqrt(eps0 * (1.0 - eps0) / static_cast<double>(reps));
}

}  // namespace detail

// ---- fit ----

inline Report run_fit(const Setup& s) {
  const double lambda = default_lambda(s);
  const PenaltySpec pen = s.cfg.penalty_spec(lambda);
  const bool target = !s.has_file_response;
  Report r = detail::start(s, {"l1_error", "l2_error", "linf_error", "bregman", "active_set_size", "false_positives",
                               "sign_recovery", "kkt_residual", "converged", "objective"});
  detail::run_replicates(r, s, [&](std::uint64_t k, detail::Row& row) {
    const Dataset d = s.replicate(k);
    Vector beta_hat;
    double kkt = 0.0;
    bool converged = false;
    Value objective;
    if (pen.kind == PenaltyKind::l1) {
      FitConfig fc;
      fc.lambda = lambda;
      const FitResult fit = fit_weighted_lasso(d, s.family, fc);
      beta_hat = fit.beta_hat;
      kkt = fit.kkt_residual;
      converged = fit.converged;
      objective = fit.objective;
    } else {
      MultistageConfig mc;
      mc.penalty = pen;
      mc.stages = s.cfg.stages;
      const StageTrace t = run_recursion(d, s.family, mc);
      beta_hat = t.stages.back().beta;
      kkt = t.stages.back().kkt_residual;
      converged = t.stages.back().converged;
    }
    const ErrorMetrics m = error_metrics(beta_hat, s.beta_star, s.support);
    row[2] = target ? Value(m.l1) : Value();
    row[3] = target ? Value(m.l2) : Value();
    row[4] = target ? Value(m.linf) : Value();
    row[5] = target ? Value(bregman_divergence(d, s.family, beta_hat, s.beta_star)) : Value();
    row[6] = count(m.active);
    row[7] = target ? count(m.false_positives) : Value();
    row[8] = target ? Value(m.sign_recovery) : Value();
    row[9] = kkt;
    row[10] = converged;
    row[11] = objective;
  });
  detail::finish(r, s, {{"lambda", lambda}});
  return r;
}

// ---- path: (lambda, error, bound) rows ----

inline Report run_path(const Setup& s) {
  const ConeSpec cone{s.cfg.xi, s.support, Vector()};
  const bool target = !s.has_file_response && !s.support.empty();
  FactorValue f2;
  if (target) f2 = ConeFactors(s.sigma(), cone, s.factor_options()).f0(Phi::lq(2.0));
  const double eta = s.cfg.eta_for(s.family);
  const Dataset first = s.replicate(0);
  const double lmax = lambda_max(first, s.family, Vector::Ones(s.p()));
  std::vector<double> grid;
  for (int i = 0; i < s.cfg.path_points; ++i)
    grid.push_back(lmax * std::pow(s.cfg.path_ratio, s.cfg.path_points > 1 ? double(i) / (s.cfg.path_points - 1) : 0.0));

  Report r = detail::start(s, {"lambda", "l2_error", "bound_l2", "in_event", "active_set_size", "kkt_residual"});
  const std::size_t per = grid.size();
  r.rows.assign(static_cast<std::size_t>(s.cfg.replicates) * per, detail::Row(r.columns.size()));
  parallel_for(
      static_cast<std::size_t>(s.cfg.replicates),
      [&](std::size_t k) {
        try {
          const Dataset d = s.replicate(k);
          const auto path = solution_path(d, s.family, grid, Vector());
          NoiseFunctionals z;
          if (target) z = noise_functionals(d, s.family, s.beta_star, s.support);
          for (std::size_t i = 0; i < per; ++i) {
            auto& row = r.rows[k * per + i];
            row[0] = count(static_cast<std::int64_t>(k));
            row[1] = std::string();
            row[2] = grid[i];
            row[6] = count(static_cast<std::int64_t>(path[i].active_set.size()));
            row[7] = path[i].kkt_residual;
            if (!target) continue;
            row[3] = (path[i].beta_hat - s.beta_star).norm();
            const bool ev = event_xi_check(1.0, grid[i], z.z0, z.z1).holds_for(s.cfg.xi);
            row[5] = ev;
            row[4] = f2.lower_bound > 0.0
                         ? oracle_bound(eta, 1.0, grid[i], z.z0, static_cast<Index>(s.support.size()), 2.0,
                                        f2.lower_bound)
                               .lq_bound
                         : kInf;
          }
        } catch (const std::exception& e) {
          for (std::size_t i = 0; i < per; ++i) {
            auto& row = r.rows[k * per + i];
            row.assign(r.columns.size(), Value());
            row[0] = count(static_cast<std::int64_t>(k));
            row[1] = std::string(e.what());
            row[2] = grid[i];
          }
        }
      },
      s.cfg.threads);
  detail::finish(r, s, {{"lambda_max", lmax}, {"factor_phi_2", f2.lower_bound}, {"factor_certified", detail::is_certified(f2)}});
  return r;
}

// ---- oracle inequality ----

/**
 * Per replicate: Lasso with unit weights, the xi event and the lq / Bregman bounds.
 * Linear family: event lambda > z1 and xi_eff <= xi, lead term lambda + z0.
 * GLM: noise event z0 <= lambda0, z1 <= lambda1 together with the deterministic condition
 * lambda + lambda0 <= min(xi (lambda - lambda1), eta e^-eta kappa*^2 / (M3 |S|)), lead term lambda + lambda0.
 * Factors are computed on Sigma (Sigma* at beta* for GLM); bounds use their certified lower ends.
 */
inline Report run_oracle_verify(const Setup& s) {
  if (s.support.empty()) throw DomainError("oracle_verify needs s0_size >= 1");
  const double lambda = default_lambda(s);
  const bool linear = s.family.m1 == 0.0;
  const double eta = s.cfg.eta_for(s.family);
  const ConeSpec cone{s.cfg.xi, s.support, Vector()};
  const Matrix sigma = s.sigma();
  ConeFactors cf(sigma, cone, s.factor_options());
  const FactorValue f_l1 = cf.f0(Phi::lq(1.0)), f_l2 = cf.f0(Phi::lq(2.0)), f_inf = cf.f0(Phi::lq(kInf)),
                    f_1s = cf.f0(Phi::support_l1());
  const bool certified = detail::is_certified(f_l1) && detail::is_certified(f_l2) && detail::is_certified(f_inf) &&
                         detail::is_certified(f_1s);
  const Index s_size = static_cast<Index>(s.support.size());
  const double lam0 = s.level.lambda0, lam1 = s.level.lambda1;

  bool condition = true;
  double m3 = 0.0;
  FactorValue kappa;
  if (!linear) {
    kappa = cf.kappa_star();
    m3 = m3_constant(Dataset(s.x, Vector::Zero(s.n())), s.family, cone);
    const double ball = eta * std::exp(-eta) * kappa.lower_bound * kappa.lower_bound / (m3 * static_cast<double>(s_size));
    condition = lambda + lam0 <= std::min(s.cfg.xi * (lambda - lam1), ball);
  }

  Report r = detail::start(
      s, {"z0", "z1", "xi_effective", "noise_event", "xi_event", "in_event", "l1_error", "l2_error", "linf_error",
          "bregman", "active_set_size", "false_positives", "sign_recovery", "bound_l1", "bound_l2", "bound_linf",
          "bound_bregman", "ok_l1", "ok_l2", "ok_linf", "ok_bregman", "kkt_residual", "converged"});
  detail::run_replicates(r, s, [&](std::uint64_t k, detail::Row& row) {
    const Dataset d = s.replicate(k);
    const NoiseFunctionals z = noise_functionals(d, s.family, s.beta_star, s.support);
    const XiEvent xe = event_xi_check(1.0, lambda, z.z0, z.z1);
    const bool noise_event = z.z0 <= lam0 && z.z1 <= lam1;
    const bool xi_event = xe.holds_for(s.cfg.xi);
    const bool in_event = linear ? xi_event : noise_event && condition;
    FitConfig fc;
    fc.lambda = lambda;
    const FitResult fit = fit_weighted_lasso(d, s.family, fc);
    const ErrorMetrics m = error_metrics(fit.beta_hat, s.beta_star, s.support);
    const double bregman = bregman_divergence(d, s.family, fit.beta_hat, s.beta_star);
    const double noise_term = linear ? z.z0 : lam0;
    const double off_term = linear ? lambda - z.z1 : lambda - lam1;
    auto bound = [&](const FactorValue& f, double q) {
      return f.lower_bound > 0.0 ? oracle_bound(eta, 1.0, lambda, noise_term, s_size, q, f.lower_bound).lq_bound : kInf;
    };
    const double b1 = bound(f_l1, 1.0), b2 = bound(f_l2, 2.0), binf = bound(f_inf, kInf);
    double bb = kInf;
    if (f_1s.lower_bound > 0.0)
      bb = *oracle_bound(eta, 1.0, lambda, noise_term, s_size, 1.0, f_1s.lower_bound, f_1s.lower_bound).bregman_bound -
           off_term * m.off_support_l1;
    row[2] = z.z0;
    row[3] = z.z1;
    row[4] = xe.xi_effective;
    row[5] = noise_event;
    row[6] = xi_event;
    row[7] = in_event;
    row[8] = m.l1;
    row[9] = m.l2;
    row[10] = m.linf;
    row[11] = bregman;
    row[12] = count(m.active);
    row[13] = count(m.false_positives);
    row[14] = m.sign_recovery;
    row[15] = b1;
    row[16] = b2;
    row[17] = binf;
    row[18] = bb;
    row[19] = within(m.l1, b1);
    row[20] = within(m.l2, b2);
    row[21] = within(m.linf, binf);
    row[22] = within(bregman, bb);
    row[23] = fit.kkt_residual;
    row[24] = fit.converged;
  });
  const std::int64_t in_event = detail::count_where(r, [](const detail::Row& row) { return detail::is_true(row[7]); });
  // a bound counts only when its factor is certified
  const bool cert[4] = {detail::is_certified(f_l1), detail::is_certified(f_l2), detail::is_certified(f_inf),
                        detail::is_certified(f_1s)};
  const std::int64_t violations = detail::count_where(r, [&](const detail::Row& row) {
    if (!detail::is_true(row[7])) return false;
    for (int b = 0; b < 4; ++b)
      if (cert[b] && detail::is_false(row[19 + static_cast<std::size_t>(b)])) return true;
    return false;
  });
  const std::int64_t noise_hits = detail::count_where(r, [](const detail::Row& row) { return detail::is_true(row[5]); });
  Fields extra = {{"lambda", lambda},
                  {"eta", eta},
                  {"factor_phi_1", f_l1.lower_bound},
                  {"factor_phi_2", f_l2.lower_bound},
                  {"factor_phi_inf", f_inf.lower_bound},
                  {"factor_phi_1S", f_1s.lower_bound},
                  {"certified_phi_1", cert[0]},
                  {"certified_phi_2", cert[1]},
                  {"certified_phi_inf", cert[2]},
                  {"certified_phi_1S", cert[3]},
                  {"factors_certified", certified},
                  {"in_event_count", count(in_event)},
                  {"in_event_violations", count(violations)},
                  {"noise_event_probability", static_cast<double>(noise_hits) / s.cfg.replicates},
                  {"noise_event_probability_floor", detail::noise_event_floor(s.cfg.eps0, s.cfg.replicates)}};
  if (!linear) {
    extra.emplace_back("glm_condition", condition);
    extra.emplace_back("kappa_star_lower", kappa.lower_bound);
    extra.emplace_back("m3", m3);
  }
  detail::finish(r, s, extra);
  return r;
}

// ---- selection consistency ----

/**
 * Lasso with unit weights at lambda = (1 + kappa1) lambda0 / (1 - kappa0) unless given, so that
 * the no-false-positive condition holds whenever z0, z1 <= lambda0.
 */
inline Report run_selection_verify(const Setup& s) {
  if (s.support.empty()) throw DomainError("selection_verify needs s0_size >= 1");
  const bool linear = s.family.m1 == 0.0;
  const double eta = s.cfg.eta_for(s.family);
  const Dataset base(s.x, Vector::Zero(s.n()));
  const SelectionMode mode = s.cfg.selection_samples > 0 && !linear
                                 ? SelectionMode::sampled_ball(s.cfg.selection_samples, s.cfg.seed)
                                 : SelectionMode::at_target_only();
  const SelectionReport irr = irrepresentable_check(base, s.family, s.beta_star, s.support, Vector(), eta, mode);
  double lambda = 0.0;
  if (s.cfg.lambda) lambda = *s.cfg.lambda;
  else if (irr.kappa0 < 1.0) lambda = (1.0 + irr.kappa1) * s.level.lambda0 / (1.0 - irr.kappa0);
  else lambda = default_lambda(s);
  double factor = kInf;
  if (!linear) {
    const ConeSpec cone{s.cfg.xi, s.support, Vector()};
    const FactorValue kappa = ConeFactors(s.sigma(), cone, s.factor_options()).kappa_star();
    factor = kappa.lower_bound * kappa.lower_bound /
             (m3_constant(base, s.family, cone) * static_cast<double>(s.support.size()));
  }
  SelectionReport at_level = irr;
  selection_predictions(at_level, lambda, s.level.lambda0, s.level.lambda1, 1.0, factor);

  Report r = detail::start(s, {"z0", "z1", "noise_event", "predicted_no_false_positive", "predicted_sign_recovery",
                               "false_positives", "no_false_positive", "sign_recovery", "active_set_size", "l2_error",
                               "prediction_violated", "kkt_residual"});
  detail::run_replicates(r, s, [&](std::uint64_t k, detail::Row& row) {
    const Dataset d = s.replicate(k);
    const NoiseFunctionals z = noise_functionals(d, s.family, s.beta_star, s.support);
    SelectionReport rep = irr;
    selection_predictions(rep, lambda, z.z0, z.z1, 1.0, factor);
    FitConfig fc;
    fc.lambda = lambda;
    const FitResult fit = fit_weighted_lasso(d, s.family, fc);
    const ErrorMetrics m = error_metrics(fit.beta_hat, s.beta_star, s.support);
    row[2] = z.z0;
    row[3] = z.z1;
    row[4] = z.z0 <= s.level.lambda0 && z.z1 <= s.level.lambda1;
    row[5] = *rep.predicted_no_false_positive;
    row[6] = *rep.predicted_sign_recovery;
    row[7] = count(m.false_positives);
    row[8] = m.false_positives == 0;
    row[9] = m.sign_recovery;
    row[10] = count(m.active);
    row[11] = m.l2;
    row[12] = (*rep.predicted_no_false_positive && m.false_positives > 0) ||
              (*rep.predicted_sign_recovery && !m.sign_recovery);
    row[13] = fit.kkt_residual;
  });
  detail::finish(r, s,
                 {{"lambda", lambda},
                  {"kappa0", irr.kappa0},
                  {"kappa1", irr.kappa1},
                  {"m0", irr.m0},
                  {"exact_suprema", irr.exact_suprema},
                  {"evaluation_mode", mode.label()},
                  {"beta_min", irr.beta_min},
                  {"beta_min_threshold", *at_level.beta_min_threshold},
                  {"predicted_sign_recovery_at_level", *at_level.predicted_sign_recovery},
                  {"prediction_violations",
                   count(detail::count_where(r, [](const detail::Row& row) { return detail::is_true(row[12]); }))}});
  return r;
}

// ---- sparsity bound ----

/**
 * Linear family: the SRC is calibrated and verified exhaustively on Sigma, then each replicate
 * checks the xi event, the gradient condition at beta* and #false positives <= d1.
 */
inline Report run_sparsity_verify(const Setup& s) {
  if (s.family.m1 != 0.0) throw UnsupportedError("sparsity_verify supports the linear family only");
  if (s.support.empty()) throw DomainError("sparsity_verify needs s0_size >= 1");
  const double lambda = default_lambda(s);
  const Matrix sigma = s.sigma();
  const double eta = s.cfg.eta;
  const SrcCalibration cal = calibrate_src(sigma, s.support, s.cfg.alpha, eta);
  const Dataset base(s.x, Vector::Zero(s.n()));
  const SparsityReport src = src_and_dimension_bound(base, s.family, s.beta_star, s.support, cal.c_lower, cal.c_upper,
                                                     cal.d_star, s.cfg.alpha, eta, true);
  const bool unbounded = src.d1 == kUnboundedDimension;

  Report r = detail::start(s, {"z0", "z1", "xi_effective", "xi_event", "gradient_lhs", "gradient_rhs",
                               "gradient_exact", "gradient_event", "in_event", "false_positives", "bound_ok",
                               "active_set_size", "l2_error", "kkt_residual"});
  detail::run_replicates(r, s, [&](std::uint64_t k, detail::Row& row) {
    const Dataset d = s.replicate(k);
    const NoiseFunctionals z = noise_functionals(d, s.family, s.beta_star, s.support);
    const XiEvent xe = event_xi_check(1.0, lambda, z.z0, z.z1);
    const Vector grad = -score(d, s.family, s.beta_star);
    const GradientCondition gc = gradient_condition(sigma, grad, s.support, src.d1, lambda, s.cfg.alpha, eta,
                                                    cal.c_lower, cal.c_upper);
    FitConfig fc;
    fc.lambda = lambda;
    const FitResult fit = fit_weighted_lasso(d, s.family, fc);
    const ErrorMetrics m = error_metrics(fit.beta_hat, s.beta_star, s.support);
    const bool in_event = xe.holds_for(s.cfg.xi) && gc.holds && src.src_holds;
    row[2] = z.z0;
    row[3] = z.z1;
    row[4] = xe.xi_effective;
    row[5] = xe.holds_for(s.cfg.xi);
    row[6] = gc.lhs;
    row[7] = gc.rhs;
    row[8] = gc.exact;
    row[9] = gc.holds;
    row[10] = in_event;
    row[11] = count(m.false_positives);
    row[12] = unbounded || m.false_positives <= src.d1;
    row[13] = count(m.active);
    row[14] = m.l2;
    row[15] = fit.kkt_residual;
  });
  const std::int64_t violations = detail::count_where(
      r, [](const detail::Row& row) { return detail::is_true(row[10]) && detail::is_false(row[12]); });
  detail::finish(r, s,
                 {{"lambda", lambda},
                  {"d_star", count(cal.d_star)},
                  {"c_lower", cal.c_lower},
                  {"c_upper", cal.c_upper},
                  {"d1", unbounded ? Value() : count(src.d1)},
                  {"src_verified", src.src_verified},
                  {"src_holds", src.src_holds},
                  {"in_event_count",
                   count(detail::count_where(r, [](const detail::Row& row) { return detail::is_true(row[10]); }))},
                  {"in_event_violations", count(violations)}});
  return r;
}

// ---- multistage ----

/**
 * Recursion with lambda = A lambda0 / (1 - kappa gamma0) and the stage radii R(l).
 * F* is the smallest search estimate of F2 over S0 and S0 plus the ell* columns most correlated
 * with the support; F0(phi_2) is taken on S0. Both come from search above the enumeration cap.
 */
inline Report run_multistage(const Setup& s) {
  if (s.support.empty()) throw DomainError("multistage needs s0_size >= 1");
  const PenaltySpec probe = s.cfg.penalty_spec(1.0);
  const double kappa = lipschitz_kappa(probe);
  const double lam0 = s.level.lambda0;
  const double lambda = s.cfg.lambda ? *s.cfg.lambda : s.cfg.a_const * lam0 / (1.0 - kappa * s.cfg.gamma0);
  const PenaltySpec pen = s.cfg.penalty_spec(lambda);
  const double eta = s.cfg.eta_for(s.family);
  const double xi = (s.cfg.a_const + 1.0) / (s.cfg.a_const - 1.0);
  const Matrix sigma = s.sigma();
  const Index p = s.p(), ell = std::min<Index>(s.cfg.ell(), p - static_cast<Index>(s.support.size()));

  const ConeSpec cone0{xi, s.support, Vector()};
  ConeFactors cf0(sigma, cone0, s.factor_options());
  const FactorValue f0_phi2 = cf0.f0(Phi::lq(2.0));
  FactorValue f_star = cf0.f2();
  if (ell > 0) {
    // S0 plus the ell* off-support columns with the largest correlation to X_S0
    const IndexSet sc = complement(s.support, p);
    std::vector<std::pair<double, Index>> score_off;
    for (Index j : sc) {
      double c = 0.0;
      for (Index i : s.support) c = std::max(c, std::abs(sigma(i, j)) / std::sqrt(sigma(i, i) * sigma(j, j)));
      score_off.emplace_back(-c, j);
    }
    std::sort(score_off.begin(), score_off.end());
    IndexSet wide = s.support;
    for (Index t = 0; t < ell; ++t) wide.push_back(score_off[static_cast<std::size_t>(t)].second);
    std::sort(wide.begin(), wide.end());
    const FactorValue f_wide = ConeFactors(sigma, ConeSpec{xi, wide, Vector()}, s.factor_options()).f2();
    if (f_wide.value < f_star.value) f_star = f_wide;
  }
  const bool certified = detail::is_certified(f_star) && detail::is_certified(f0_phi2);
  const double f_star_used = certified ? f_star.lower_bound : f_star.value;
  const double f0_used = certified ? f0_phi2.lower_bound : f0_phi2.value;

  Vector rho_s0(static_cast<Index>(s.support.size()));
  for (std::size_t t = 0; t < s.support.size(); ++t)
    rho_s0[static_cast<Index>(t)] = rho_derivative(pen, std::abs(s.beta_star[s.support[t]]));

  const int stages = s.cfg.stages;
  std::vector<std::string> cols = {"noise_sup", "event"};
  for (int l = 0; l <= stages; ++l) cols.push_back("l2_stage" + std::to_string(l));
  for (int l = 0; l <= stages; ++l) cols.push_back("radius_stage" + std::to_string(l));
  cols.insert(cols.end(), {"radius_ok", "ratio_last_to_first", "active_set_size", "max_kkt_residual", "converged"});
  Report r = detail::start(s, cols);
  const std::size_t l2_at = 4, radius_at = 5 + static_cast<std::size_t>(stages), tail = 6 + 2 * static_cast<std::size_t>(stages);

  ContractionInputs base_in;
  base_in.kappa = kappa;
  base_in.f_star = f_star_used;
  base_in.f0_phi2 = f0_used;
  base_in.s0_size = static_cast<Index>(s.support.size());
  base_in.eta = eta;
  base_in.gamma0 = s.cfg.gamma0;
  base_in.a_const = s.cfg.a_const;
  base_in.lambda0 = lam0;
  base_in.rho_s0_norm = rho_s0.norm();
  base_in.ell_star = ell;
  base_in.stages = stages;
  base_in.xi = xi;
  const ContractionReport nominal = contraction_report(base_in);

  detail::run_replicates(r, s, [&](std::uint64_t k, detail::Row& row) {
    const Dataset d = s.replicate(k);
    const Vector sc = score(d, s.family, s.beta_star);
    ContractionInputs in = base_in;
    in.noise_s0_norm = gather(sc, s.support).norm();
    const ContractionReport rep = contraction_report(in);
    const double noise_sup = sc.lpNorm<Eigen::Infinity>();
    const bool event = recursion_event(rep, noise_sup);
    MultistageConfig mc;
    mc.penalty = pen;
    mc.stages = stages;
    mc.track_target = s.beta_star;
    const StageTrace t = run_recursion(d, s.family, mc);
    row[2] = noise_sup;
    row[3] = event;
    bool radius_ok = true, converged = true;
    double kkt = 0.0;
    for (int l = 0; l <= stages; ++l) {
      const double err = *t.stages[static_cast<std::size_t>(l)].l2_error_to_target;
      row[l2_at + static_cast<std::size_t>(l)] = err;
      if (static_cast<std::size_t>(l) < rep.radii.size()) {
        const double rad = rep.radii[static_cast<std::size_t>(l)];
        row[radius_at + static_cast<std::size_t>(l)] = rad;
        radius_ok = radius_ok && within(err, rad);
      }
      kkt = std::max(kkt, t.stages[static_cast<std::size_t>(l)].kkt_residual);
      converged = converged && t.stages[static_cast<std::size_t>(l)].converged;
    }
    const double first = *t.stages.front().l2_error_to_target, last = *t.stages.back().l2_error_to_target;
    row[tail] = radius_ok;
    row[tail + 1] = first > 0.0 ? last / first : (last == 0.0 ? 1.0 : kInf);
    row[tail + 2] = count(t.stages.back().active_set_size);
    row[tail + 3] = kkt;
    row[tail + 4] = converged;
  });
  const std::int64_t in_event = detail::count_where(r, [](const detail::Row& row) { return detail::is_true(row[3]); });
  const std::int64_t violations = detail::count_where(
      r, [&](const detail::Row& row) { return detail::is_true(row[3]) && detail::is_false(row[tail]); });
  detail::finish(r, s,
                 {{"lambda", lambda},
                  {"kappa", kappa},
                  {"xi", xi},
                  {"f_star", f_star_used},
                  {"f0_phi2", f0_used},
                  {"factors_certified", certified},
                  {"r0", nominal.r0},
                  {"contracts", nominal.contracts},
                  {"radius_condition", opt(nominal.radius_condition)},
                  {"suggested_stages", count(suggested_stages(nominal))},
                  {"in_event_count", count(in_event)},
                  {"in_event_radius_violations", count(violations)}});
  return r;
}

// ---- diagnostics: factor table at beta* ----

inline Report run_diagnostics(const Setup& s) {
  if (s.support.empty()) throw DomainError("diagnostics needs s0_size >= 1");
  const double lambda = default_lambda(s);
  const ConeSpec cone{s.cfg.xi, s.support, Vector()};
  const Matrix sigma = s.sigma();
  InvertibilityReport inv = invertibility_report(
      sigma, cone, {Phi::lq(1.0), Phi::lq(2.0), Phi::lq(kInf), Phi::support_l1()}, s.factor_options());
  const Dataset d = s.replicate(0);
  const double eta = s.cfg.eta_for(s.family);
  std::optional<double> m3;
  if (s.family.m1 != 0.0) {
    const GlmGifBounds g = glm_gif_lower_bounds(d, s.family, s.beta_star, cone, default_m2(d, s.family), s.factor_options());
    inv.f_star_glm = g.f_star;
    inv.f_lower_glm = g.f_lower;
    m3 = g.m3;
  }
  Report r = to_report(inv);
  r.experiment = to_string(s.cfg.experiment);
  r.config = config_fields(s.cfg);
  const NoiseFunctionals z = noise_functionals(d, s.family, s.beta_star, s.support);
  const SelectionReport irr =
      irrepresentable_check(d, s.family, s.beta_star, s.support, Vector(), eta, SelectionMode::at_target_only());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma, Eigen::EigenvaluesOnly);
  r.aggregates.emplace_back("lambda", lambda);
  r.aggregates.emplace_back("lambda0", s.level.lambda0);
  r.aggregates.emplace_back("z0", z.z0);
  r.aggregates.emplace_back("z1", z.z1);
  r.aggregates.emplace_back("xi_effective", event_xi_check(1.0, lambda, z.z0, z.z1).xi_effective);
  r.aggregates.emplace_back("kappa0", irr.kappa0);
  r.aggregates.emplace_back("kappa1", irr.kappa1);
  r.aggregates.emplace_back("m0", irr.m0);
  r.aggregates.emplace_back("sigma_lambda_min", es.eigenvalues()[0]);
  r.aggregates.emplace_back("sigma_lambda_max", es.eigenvalues()[es.eigenvalues().size() - 1]);
  r.aggregates.emplace_back("m3", opt(m3));
  return r;
}

inline Report run_experiment(const ExperimentConfig& cfg) {
  const Setup s = make_setup(cfg);
  switch (cfg.experiment) {
    case Experiment::fit: return run_fit(s);
    case Experiment::path: return run_path(s);
    case Experiment::multistage: return run_multistage(s);
    case Experiment::oracle_verify: return run_oracle_verify(s);
    case Experiment::selection_verify: return run_selection_verify(s);
    case Experiment::sparsity_verify: return run_sparsity_verify(s);
    case Experiment::diagnostics: return run_diagnostics(s);
  }
  throw DomainError("unknown experiment");
}

}  // namespace wlasso::bench
