// Small end-to-end example: simulate a sparse linear model, fit the Lasso at the
// calibrated level, run three adaptive MCP stages and print the cone factors.

#include <wlasso/analysis/cone.hpp>
#include <wlasso/analysis/noise.hpp>
#include <wlasso/bench/data.hpp>
#include <wlasso/multistage.hpp>
#include <wlasso/solver.hpp>

#include <cstdio>

int main() {
  using namespace wlasso;
  bench::ExperimentConfig cfg;
  cfg.n = 120;
  cfg.p = 10;
  cfg.s0_size = 3;
  cfg.beta_min = 1.0;
  cfg.beta_max = 2.0;
  cfg.seed = 7;
  const auto sim = bench::generate_synthetic(cfg);
  const GlmFamily family = GlmFamily::linear();

  const PenaltyLevel level = penalty_level(family, DataSummary::of(sim.data), 0.05, BoundedCurvature{});
  const double lambda = 2.0 * level.lambda0;  // xi = 3
  FitConfig fc;
  fc.lambda = lambda;
  const FitResult lasso = fit_weighted_lasso(sim.data, family, fc);
  std::printf("lambda0 %.4f  lambda %.4f  kkt %.2e  active %zu\n", level.lambda0, lambda, lasso.kkt_residual,
              lasso.active_set.size());

  MultistageConfig mc;
  mc.penalty = PenaltySpec::mcp(lambda, 3.0);
  mc.stages = 3;
  mc.track_target = sim.beta_star;
  const StageTrace trace = run_recursion(sim.data, family, mc);
  for (std::size_t s = 0; s < trace.stages.size(); ++s)
    std::printf("stage %zu  l2 error %.4f\n", s, *trace.stages[s].l2_error_to_target);

  const Matrix sigma = sim.data.x().transpose() * sim.data.x() / static_cast<double>(sim.data.n());
  ConeFactors factors(sigma, ConeSpec{3.0, {0, 1, 2}, Vector()});
  std::printf("kappa* %.4f  RE2 %.4f  F0(phi_2) %.4f (%s)\n", factors.kappa_star().value, factors.re2().value,
              factors.f0(Phi::lq(2.0)).value, to_string(factors.f0(Phi::lq(2.0)).method).c_str());
  return 0;
}
