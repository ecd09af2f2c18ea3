#include <benchmark/benchmark.h>

#include "ccbf/adaptation.hpp"
#include "ccbf/scenarios.hpp"

using namespace ccbf;

namespace {

void BM_BoxQp(benchmark::State& state) {
  Vector u0(2), lo(2), hi(2);
  u0 << 3.0, -1.0;
  lo << -4.0, -4.0;
  hi << 4.0, 4.0;
  std::vector<AffineRow> rows;
  Vector g(2);
  g << -1.0, 0.5;
  rows.push_back({0.4, g});
  g << 0.3, 1.0;
  rows.push_back({1.0, g});
  for (auto _ : state) benchmark::DoNotOptimize(solve_box_qp(u0, lo, hi, rows));
}
BENCHMARK(BM_BoxQp);

AdaptationContext context_of(const Scenario& sc) {
  AdaptationContext ctx;
  ctx.kernel = sc.kernel;
  ctx.constraints = sc.constraints;
  ctx.system = sc.system;
  ctx.alpha = sc.alpha;
  ctx.objective = WeightObjective::proximal(sc.w_guess);
  return ctx;
}

void mu_nu(benchmark::State& state, const Scenario& sc) {
  const AdaptationContext ctx = context_of(sc);
  WeightState ws = sc.weights;
  ws.w = initialize_weights(sc.w_guess, ctx, ws, 0.0, sc.x0, sc.init);
  for (auto _ : state) benchmark::DoNotOptimize(compute_mu_nu(ctx, ws, 0.0, ws.w, sc.x0));
}

void BM_MuNu1d(benchmark::State& state) { mu_nu(state, build_scenario_1d()); }
BENCHMARK(BM_MuNu1d);

void BM_MuNuBicycle(benchmark::State& state) { mu_nu(state, build_scenario_bicycle()); }
BENCHMARK(BM_MuNuBicycle);

void BM_Run1d(benchmark::State& state) {
  const Scenario sc = build_scenario_1d();
  const ControllerSpec ctl = parse_controller("ccbf-qp");
  for (auto _ : state) benchmark::DoNotOptimize(run_simulation(sc, ctl));
}
BENCHMARK(BM_Run1d)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
