#pragma once

#include <wlasso/analysis/cone.hpp>
#include <wlasso/analysis/selection.hpp>
#include <wlasso/analysis/sparsity.hpp>
#include <wlasso/bench/config.hpp>
#include <wlasso/bench/data.hpp>
#include <wlasso/multistage.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace wlasso::bench {

using Value = std::variant<std::monostate, bool, std::int64_t, double, std::string>;
using Fields = std::vector<std::pair<std::string, Value>>;

inline Value opt(const std::optional<double>& v) { return v ? Value(*v) : Value(); }
inline Value opt(const std::optional<bool>& v) { return v ? Value(*v) : Value(); }
inline Value count(std::int64_t v) { return Value(v); }

/**
 * Tabular result: one row per replicate (or per item) with a fixed column order,
 * plus ordered aggregate fields. Every row has exactly columns.size() cells.
 */
struct Report {
  std::string experiment;
  Fields config;
  std::vector<std::string> columns;
  std::vector<std::vector<Value>> rows;
  Fields aggregates;

  std::size_t column(const std::string& name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw DomainError("no column '" + name + "'");
    return static_cast<std::size_t>(it - columns.begin());
  }
  const Value* aggregate(const std::string& name) const {
    for (const auto& [k, v] : aggregates)
      if (k == name) return &v;
    return nullptr;
  }
  double aggregate_number(const std::string& name) const {
    const Value* v = aggregate(name);
    if (!v) throw DomainError("no aggregate '" + name + "'");
    if (auto d = std::get_if<double>(v)) return *d;
    if (auto i = std::get_if<std::int64_t>(v)) return static_cast<double>(*i);
    if (auto b = std::get_if<bool>(v)) return *b ? 1.0 : 0.0;
    return std::nan("");
  }
};

using SimulationResult = Report;

inline Fields config_fields(const ExperimentConfig& c) {
  Fields f;
  f.emplace_back("experiment", to_string(c.experiment));
  f.emplace_back("family", c.family);
  f.emplace_back("sigma2", c.sigma2);
  f.emplace_back("penalty", c.penalty);
  f.emplace_back("n", count(c.n));
  f.emplace_back("p", count(c.p));
  f.emplace_back("s0_size", count(c.s0_size));
  f.emplace_back("beta_min", c.beta_min);
  f.emplace_back("beta_max", c.beta_max);
  f.emplace_back("design", to_string(c.design.kind));
  f.emplace_back("rho", c.design.rho);
  f.emplace_back("design_path", c.design.path);
  f.emplace_back("standardize", c.standardize);
  f.emplace_back("replicates", count(c.replicates));
  f.emplace_back("eps0", c.eps0);
  f.emplace_back("xi", c.xi);
  f.emplace_back("seed", std::to_string(c.seed));
  f.emplace_back("lambda", c.lambda ? Value(*c.lambda) : Value(std::string("auto")));
  f.emplace_back("eta", c.eta);
  f.emplace_back("stages", count(c.stages));
  f.emplace_back("a_const", c.a_const);
  f.emplace_back("gamma0", c.gamma0);
  f.emplace_back("ell_star", count(c.ell()));
  f.emplace_back("alpha", c.alpha);
  f.emplace_back("path_points", count(c.path_points));
  f.emplace_back("path_ratio", c.path_ratio);
  f.emplace_back("selection_samples", count(c.selection_samples));
  f.emplace_back("enumeration_cap", count(c.enumeration_cap));
  f.emplace_back("search_restarts", count(c.search_restarts));
  return f;
}

namespace detail {

inline std::optional<double> as_number(const Value& v) {
  if (auto d = std::get_if<double>(&v)) return *d;
  if (auto i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return std::nullopt;
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace detail

/**
 * Generic aggregates in column order: count, then mean_/median_ for numeric columns other than the replicate index
 * (finite values only) and rate_ for boolean columns (non-null values only).
 */
inline Fields summarize(const Report& r) {
  Fields out;
  out.emplace_back("count", count(static_cast<std::int64_t>(r.rows.size())));
  for (std::size_t c = 0; c < r.columns.size(); ++c) {
    if (r.columns[c] == "replicate") continue;
    std::vector<double> nums;
    std::int64_t trues = 0, bools = 0;
    bool numeric = false, boolean = false;
    for (const auto& row : r.rows) {
      const Value& v = row[c];
      if (auto b = std::get_if<bool>(&v)) {
        boolean = true;
        ++bools;
        trues += *b;
      } else if (auto d = detail::as_number(v)) {
        numeric = true;
        if (std::isfinite(*d)) nums.push_back(*d);
      }
    }
    if (numeric) {
      double mean = std::nan("");
      if (!nums.empty()) {
        mean = 0.0;
        for (double x : nums) mean += x;
        mean /= static_cast<double>(nums.size());
      }
      out.emplace_back("mean_" + r.columns[c], mean);
      out.emplace_back("median_" + r.columns[c], detail::median_of(nums));
    } else if (boolean) {
      out.emplace_back("rate_" + r.columns[c], bools ? static_cast<double>(trues) / static_cast<double>(bools)
                                                      : std::nan(""));
    }
  }
  return out;
}

// ---- serialization ----

namespace detail {

inline std::string json_string(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(ch) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", ch);
          out += buf;
        } else {
          out += ch;
        }
    }
  }
  return out + "\"";
}

// Non-finite doubles are written as the strings "inf", "-inf" and "nan".
inline std::string json_value(const Value& v) {
  struct V {
    std::string operator()(std::monostate) const { return "null"; }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(double d) const {
      if (std::isnan(d)) return "\"nan\"";
      if (std::isinf(d)) return d > 0 ? "\"inf\"" : "\"-inf\"";
      return format_double(d);
    }
    std::string operator()(const std::string& s) const { return json_string(s); }
  };
  return std::visit(V{}, v);
}

inline std::string csv_value(const Value& v) {
  struct V {
    std::string operator()(std::monostate) const { return ""; }
    std::string operator()(bool b) const { return b ? "1" : "0"; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(double d) const {
      if (std::isnan(d)) return "nan";
      if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
      return format_double(d);
    }
    std::string operator()(const std::string& s) const {
      if (s.find_first_of(",\"\n") == std::string::npos) return s;
      std::string q = "\"";
      for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
      return q + "\"";
    }
  };
  return std::visit(V{}, v);
}

inline std::string json_object(const Fields& f) {
  std::string out = "{";
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (i) out += ", ";
    out += json_string(f[i].first) + ": " + json_value(f[i].second);
  }
  return out + "}";
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

/** JSON document; the timestamp sits alone on the second line so it can be stripped. */
inline std::string to_json(const Report& r, const std::string& timestamp = detail::utc_timestamp()) {
  std::ostringstream out;
  out << "{\n";
  out << "  \"timestamp\": " << detail::json_string(timestamp) << ",\n";
  out << "  \"schema_version\": \"1\",\n";
  out << "  \"experiment\": " << detail::json_string(r.experiment) << ",\n";
  out << "  \"config\": " << detail::json_object(r.config) << ",\n";
  out << "  \"records\": [";
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    Fields f;
    for (std::size_t c = 0; c < r.columns.size(); ++c) f.emplace_back(r.columns[c], r.rows[i][c]);
    out << (i ? ",\n    " : "\n    ") << detail::json_object(f);
  }
  out << (r.rows.empty() ? "],\n" : "\n  ],\n");
  out << "  \"aggregates\": " << detail::json_object(r.aggregates) << "\n";
  out << "}\n";
  return out.str();
}

/** Header row with the fixed column order, then one row per record. */
inline std::string to_csv(const Report& r) {
  std::ostringstream out;
  for (std::size_t c = 0; c < r.columns.size(); ++c) out << (c ? "," : "") << r.columns[c];
  out << '\n';
  for (const auto& row : r.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << detail::csv_value(row[c]);
    out << '\n';
  }
  return out.str();
}

// ---- analysis reports as tables ----

inline Report to_report(const InvertibilityReport& rep) {
  Report r;
  r.experiment = "invertibility";
  r.config = {{"method", to_string(rep.method)}, {"certified_lower_bound", rep.certified_lower_bound}};
  r.columns = {"factor", "value", "lower_bound", "certified", "method"};
  auto add = [&](const std::string& name, const FactorValue& v) {
    r.rows.push_back({name, v.value, v.lower_bound, v.certified, to_string(v.method)});
  };
  add("kappa_star", rep.kappa_star);
  add("re2", rep.re2);
  add("f2", rep.f2);
  for (const auto& [phi, v] : rep.f0_by_phi) add("f0_" + phi.label(), v);
  if (rep.f_star_glm) add("f_star_glm", *rep.f_star_glm);
  if (rep.f_lower_glm) add("f_lower_glm", *rep.f_lower_glm);
  r.aggregates = summarize(r);
  return r;
}

inline Report to_report(const SelectionReport& rep) {
  Report r;
  r.experiment = "selection";
  r.config = {{"evaluation_mode", rep.evaluation_mode.label()}, {"eta_ball", rep.eta_ball}};
  r.columns = {"kappa0", "kappa1", "m0", "ball_radius", "exact_suprema", "points_evaluated",
               "predicted_no_false_positive", "predicted_sign_recovery", "beta_min_threshold", "beta_min"};
  r.rows.push_back({rep.kappa0, rep.kappa1, rep.m0, rep.ball_radius, rep.exact_suprema,
                    count(rep.points_evaluated), opt(rep.predicted_no_false_positive),
                    opt(rep.predicted_sign_recovery), opt(rep.beta_min_threshold), rep.beta_min});
  r.aggregates = summarize(r);
  return r;
}

inline Report to_report(const SparsityReport& rep) {
  Report r;
  r.experiment = "sparsity";
  r.columns = {"c_lower", "c_upper", "d_star", "alpha", "eta", "d1", "d1_unbounded", "src_cardinality_lhs",
               "src_cardinality_holds", "src_verified", "observed_c_lower", "observed_c_upper", "src_holds",
               "gradient_condition_holds"};
  const bool unbounded = rep.d1 == kUnboundedDimension;
  r.rows.push_back({rep.c_lower, rep.c_upper, count(rep.d_star), rep.alpha, rep.eta,
                    unbounded ? Value() : count(rep.d1), unbounded, rep.src_cardinality_lhs,
                    rep.src_cardinality_holds, rep.src_verified, opt(rep.observed_c_lower),
                    opt(rep.observed_c_upper), rep.src_holds, opt(rep.gradient_condition_holds)});
  r.aggregates = summarize(r);
  return r;
}

inline Report to_report(const StageTrace& trace) {
  Report r;
  r.experiment = "stage_trace";
  r.columns = {"stage", "kkt_residual", "converged", "active_set_size", "l2_error_to_target"};
  for (std::size_t s = 0; s < trace.stages.size(); ++s) {
    const auto& st = trace.stages[s];
    r.rows.push_back({count(static_cast<std::int64_t>(s)), st.kkt_residual, st.converged,
                      count(st.active_set_size), opt(st.l2_error_to_target)});
  }
  r.aggregates = summarize(r);
  return r;
}

inline void emit_report(const Report& r, const std::string& format, const std::string& path) {
  if (format != "json" && format != "csv") throw DomainError("format must be json or csv");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write '" + path + "'");
  out << (format == "json" ? to_json(r) : to_csv(r));
  if (!out) throw IngestionError("write failed for '" + path + "'");
}

template <class AnalysisReport>
void emit_report(const AnalysisReport& rep, const std::string& format, const std::string& path) {
  emit_report(to_report(rep), format, path);
}

}  // namespace wlasso::bench
