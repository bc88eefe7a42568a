#include <benchmark/benchmark.h>

#include "ivins/monte_carlo.hpp"

namespace {

ivins::ScenarioConfig bench_config() {
  ivins::ScenarioConfig cfg;
  cfg.duration = 5.0;
  return cfg;
}

ivins::McOptions bench_options(int runs) {
  ivins::McOptions opts;
  opts.runs = runs;
  return opts;
}

void BM_MonteCarloSerial(benchmark::State& state) {
  const auto cfg = bench_config();
  const auto opts = bench_options(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ivins::run_monte_carlo_serial(cfg, opts));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_MonteCarloOpenMP(benchmark::State& state) {
  const auto cfg = bench_config();
  const auto opts = bench_options(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ivins::run_monte_carlo(cfg, opts));
  }
  state.counters["threads"] = ivins::resolve_threads(opts);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_MonteCarloSerial)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MonteCarloOpenMP)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
