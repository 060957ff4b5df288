// Serial reference vs OpenMP path for the chunked kernels. Both paths return
// identical values; only wall time differs.

#include <benchmark/benchmark.h>

#include "drnd/drnd.hpp"
#include "drnd/harness.hpp"
#include "drnd/lab.hpp"

namespace {

drnd::Exec exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? drnd::Exec::serial : drnd::Exec::parallel;
}

void BM_BonusBatch(benchmark::State& state) {
  drnd::DrndConfig cfg;
  cfg.input_dim = 16;
  cfg.output_dim = 32;
  cfg.predictor_hidden = {64, 64};
  cfg.target_hidden = {64};
  const drnd::Drnd model(cfg, 1);
  drnd::Rng rng(2);
  drnd::Matrix x(16, state.range(1));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(model.bonus_batch(x, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * x.cols());
}
BENCHMARK(BM_BonusBatch)->ArgsProduct({{0, 1}, {1024, 16384}})->ArgNames({"parallel", "inputs"});

void BM_SamplePseudoCount(benchmark::State& state) {
  const auto dist = drnd::lab::DiscreteTargetDist::scalar({0.0, 2.0});
  const auto trials = static_cast<std::uint64_t>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(drnd::lab::sample_pseudo_count(dist, 10, trials, 3, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_SamplePseudoCount)->ArgsProduct({{0, 1}, {1 << 18}})->ArgNames({"parallel", "trials"});

void BM_InconsistencySeeds(benchmark::State& state) {
  drnd::harness::InconsistencyConfig cfg;
  cfg.categories = 30;
  cfg.epochs = 50;
  cfg.spread_targets = {1, 4};
  cfg.seeds = {0, 1, 2, 3};
  for (auto _ : state) benchmark::DoNotOptimize(drnd::harness::run_inconsistency_experiment(cfg, exec_of(state)));
}
BENCHMARK(BM_InconsistencySeeds)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
