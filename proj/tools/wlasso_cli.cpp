// wlasso_cli: simulation and verification harness.
//
//   wlasso_cli <subcommand> [--config file.json] [flags]
//
// Exit codes: 0 success, 1 usage error, 2 ingestion error, 3 numerical failure.

#include "config_file.hpp"

#include <wlasso/bench/experiments.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string output;
  std::string format;
  bool standardize = false;
  bool no_standardize = false;
  std::optional<int> replicates;
  std::string family;
  std::string penalty;
  std::string lambda;
  std::optional<double> xi;
  std::optional<double> eps0;
  std::optional<Eigen::Index> n, p, s0;
  std::optional<double> beta_min, beta_max, rho, eta;
  std::string design;
  std::string data;
  bool header = false;
  std::optional<int> stages;
  std::optional<unsigned> threads;
};

void add_flags(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "JSON config file");
  sub->add_option("--seed", o.seed, "64-bit seed");
  sub->add_option("--output", o.output, "output path (default stdout)");
  sub->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  sub->add_flag("--standardize", o.standardize, "rescale columns to |x_j|^2 = n");
  sub->add_flag("--no-standardize", o.no_standardize, "keep columns as drawn or read");
  sub->add_option("--replicates", o.replicates, "number of replicates");
  sub->add_option("--family", o.family, "linear, logistic or poisson")
      ->check(CLI::IsMember({"linear", "logistic", "poisson"}));
  sub->add_option("--penalty", o.penalty, "l1, mcp:<gamma> or scad:<a>");
  sub->add_option("--lambda", o.lambda, "penalty level or auto");
  sub->add_option("--xi", o.xi, "cone parameter");
  sub->add_option("--eps0", o.eps0, "noise event level");
  sub->add_option("--n", o.n, "sample size");
  sub->add_option("--p", o.p, "number of predictors");
  sub->add_option("--s0", o.s0, "support size of the target");
  sub->add_option("--beta-min", o.beta_min, "smallest target magnitude");
  sub->add_option("--beta-max", o.beta_max, "largest target magnitude");
  sub->add_option("--design", o.design, "identity, gaussian_iid, gaussian_correlated or from_file");
  sub->add_option("--rho", o.rho, "neighbour correlation of gaussian_correlated");
  sub->add_option("--data", o.data, "CSV file for from_file (last column is y)");
  sub->add_flag("--header", o.header, "CSV file has a header row");
  sub->add_option("--eta", o.eta, "ball radius in the GLM conditions");
  sub->add_option("--stages", o.stages, "multistage depth");
  sub->add_option("--threads", o.threads, "worker threads (0 = all cores)");
}

wlasso::bench::ExperimentConfig build_config(wlasso::bench::Experiment e, const Overrides& o) {
  using namespace wlasso;
  bench::ExperimentConfig c;
  if (!o.config.empty()) cli::load_config_file(c, o.config);
  c.experiment = e;
  if (o.seed) c.seed = *o.seed;
  if (!o.output.empty()) c.output = o.output;
  if (!o.format.empty()) c.format = o.format;
  if (o.standardize) c.standardize = true;
  if (o.no_standardize) c.standardize = false;
  if (o.replicates) c.replicates = *o.replicates;
  if (!o.family.empty()) c.family = o.family;
  if (!o.penalty.empty()) c.penalty = o.penalty;
  if (!o.lambda.empty()) {
    if (o.lambda == "auto") {
      c.lambda.reset();
    } else {
      try {
        std::size_t used = 0;
        c.lambda = std::stod(o.lambda, &used);
        if (used != o.lambda.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw DomainError("--lambda must be a number or auto");
      }
    }
  }
  if (o.xi) c.xi = *o.xi;
  if (o.eps0) c.eps0 = *o.eps0;
  if (o.n) c.n = *o.n;
  if (o.p) c.p = *o.p;
  if (o.s0) c.s0_size = *o.s0;
  if (o.beta_min) c.beta_min = *o.beta_min;
  if (o.beta_max) c.beta_max = *o.beta_max;
  if (!o.design.empty()) c.design.kind = bench::design_from_string(o.design);
  if (o.rho) c.design.rho = *o.rho;
  if (!o.data.empty()) {
    c.design.kind = bench::DesignKind::from_file;
    c.design.path = o.data;
    // dimensions come from the file unless given explicitly
    if (!o.n) c.n = 0;
    if (!o.p) c.p = 0;
  }
  if (o.header) c.design.header = true;
  if (o.eta) c.eta = *o.eta;
  if (o.stages) c.stages = *o.stages;
  if (o.threads) c.threads = *o.threads;
  c.validate();
  return c;
}

bool is_verify(wlasso::bench::Experiment e) {
  using wlasso::bench::Experiment;
  return e == Experiment::oracle_verify || e == Experiment::selection_verify || e == Experiment::sparsity_verify;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace wlasso;
  CLI::App app{"Weighted and multistage Lasso for GLMs: fits, paths and bound verification"};
  app.require_subcommand(1);
  Overrides o;
  const std::vector<std::pair<std::string, bench::Experiment>> subs = {
      {"fit", bench::Experiment::fit},
      {"path", bench::Experiment::path},
      {"multistage", bench::Experiment::multistage},
      {"oracle-verify", bench::Experiment::oracle_verify},
      {"selection-verify", bench::Experiment::selection_verify},
      {"sparsity-verify", bench::Experiment::sparsity_verify},
      {"diagnostics", bench::Experiment::diagnostics}};
  for (const auto& [name, e] : subs) add_flags(app.add_subcommand(name, "run the " + name + " experiment"), o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  bench::Experiment experiment = bench::Experiment::fit;
  for (const auto& [name, e] : subs)
    if (app.got_subcommand(name)) experiment = e;

  bench::ExperimentConfig cfg;
  try {
    if (is_verify(experiment) && !o.seed) {
      std::cerr << "error: --seed is required for verify subcommands\n";
      return 1;
    }
    cfg = build_config(experiment, o);
  } catch (const IngestionError& e) {
    std::cerr << "ingestion error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  }

  try {
    const bench::Report report = bench::run_experiment(cfg);
    if (cfg.output.empty()) {
      std::cout << (cfg.format == "json" ? bench::to_json(report) : bench::to_csv(report));
    } else {
      bench::emit_report(report, cfg.format, cfg.output);
    }
  } catch (const IngestionError& e) {
    std::cerr << "ingestion error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
