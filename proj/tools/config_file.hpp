#pragma once

// JSON config files for the bench CLI. Keys mirror ExperimentConfig; unknown keys are rejected.

#include <wlasso/bench/config.hpp>

#include <json.hpp>

#include <fstream>
#include <set>
#include <string>

namespace wlasso::cli {

inline void apply_json(bench::ExperimentConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw DomainError("config must be a JSON object");
  static const std::set<std::string> known = {
      "experiment", "family", "sigma2", "penalty", "n", "p", "s0_size", "beta_min", "beta_max", "design",
      "standardize", "replicates", "eps0", "xi", "seed", "output", "format", "lambda", "eta", "stages",
      "a_const", "gamma0", "ell_star", "alpha", "path_points", "path_ratio", "selection_samples",
      "enumeration_cap", "search_restarts", "threads"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw DomainError("unknown config key '" + it.key() + "'");
  try {
    if (j.contains("experiment")) c.experiment = bench::experiment_from_string(j["experiment"].get<std::string>());
    if (j.contains("family")) c.family = j["family"].get<std::string>();
    if (j.contains("sigma2")) c.sigma2 = j["sigma2"].get<double>();
    if (j.contains("penalty")) c.penalty = j["penalty"].get<std::string>();
    if (j.contains("n")) c.n = j["n"].get<Index>();
    if (j.contains("p")) c.p = j["p"].get<Index>();
    if (j.contains("s0_size")) c.s0_size = j["s0_size"].get<Index>();
    if (j.contains("beta_min")) c.beta_min = j["beta_min"].get<double>();
    if (j.contains("beta_max")) c.beta_max = j["beta_max"].get<double>();
    if (j.contains("design")) {
      const auto& d = j["design"];
      if (d.is_string()) {
        c.design.kind = bench::design_from_string(d.get<std::string>());
      } else {
        c.design.kind = bench::design_from_string(d.at("kind").get<std::string>());
        if (d.contains("rho")) c.design.rho = d["rho"].get<double>();
        if (d.contains("path")) c.design.path = d["path"].get<std::string>();
        if (d.contains("header")) c.design.header = d["header"].get<bool>();
      }
    }
    if (j.contains("standardize")) c.standardize = j["standardize"].get<bool>();
    if (j.contains("replicates")) c.replicates = j["replicates"].get<int>();
    if (j.contains("eps0")) c.eps0 = j["eps0"].get<double>();
    if (j.contains("xi")) c.xi = j["xi"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("output")) c.output = j["output"].get<std::string>();
    if (j.contains("format")) c.format = j["format"].get<std::string>();
    if (j.contains("lambda")) {
      if (j["lambda"].is_string() && j["lambda"].get<std::string>() == "auto") c.lambda.reset();
      else c.lambda = j["lambda"].get<double>();
    }
    if (j.contains("eta")) c.eta = j["eta"].get<double>();
    if (j.contains("stages")) c.stages = j["stages"].get<int>();
    if (j.contains("a_const")) c.a_const = j["a_const"].get<double>();
    if (j.contains("gamma0")) c.gamma0 = j["gamma0"].get<double>();
    if (j.contains("ell_star")) c.ell_star = j["ell_star"].get<Index>();
    if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
    if (j.contains("path_points")) c.path_points = j["path_points"].get<int>();
    if (j.contains("path_ratio")) c.path_ratio = j["path_ratio"].get<double>();
    if (j.contains("selection_samples")) c.selection_samples = j["selection_samples"].get<int>();
    if (j.contains("enumeration_cap")) c.enumeration_cap = j["enumeration_cap"].get<int>();
    if (j.contains("search_restarts")) c.search_restarts = j["search_restarts"].get<int>();
    if (j.contains("threads")) c.threads = j["threads"].get<unsigned>();
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("bad config value: ") + e.what());
  }
}

inline void load_config_file(bench::ExperimentConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError("config '" + path + "' is not valid JSON: " + e.what());
  }
  apply_json(c, j);
}

}  // namespace wlasso::cli
