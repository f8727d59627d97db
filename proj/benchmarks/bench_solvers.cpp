#include <benchmark/benchmark.h>

#include "ncbsbl/array_model.hpp"
#include "ncbsbl/bsbl_fmlm.hpp"
#include "ncbsbl/sbl_baselines.hpp"
#include "ncbsbl/synth.hpp"

using namespace ncbsbl;

namespace {

ScenarioConfig scenario(double snr_db) {
  ScenarioConfig sc;
  sc.snr_db = snr_db;
  return sc;
}

void BM_NcBsblSolve(benchmark::State& state) {
  const ScenarioConfig sc = scenario(static_cast<double>(state.range(0)));
  const AugmentedObservation obs = synthesize(sc);
  const BlockDictionary dict = build_block_dictionary(sc.grid, sc.num_elements);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve(obs.Y, dict, SolverConfig{}));
  }
}
BENCHMARK(BM_NcBsblSolve)->Arg(0)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_EmSblSolve(benchmark::State& state) {
  const ScenarioConfig sc = scenario(static_cast<double>(state.range(0)));
  const AugmentedObservation obs = synthesize(sc);
  const CMatrix A = build_dictionary(sc.grid, sc.num_elements);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sbl_em_solve(obs.Z, A, SolverConfig{}));
  }
}
BENCHMARK(BM_EmSblSolve)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_ProposeAction(benchmark::State& state) {
  const ScenarioConfig sc = scenario(10.0);
  const AugmentedObservation obs = synthesize(sc);
  const BlockDictionary dict = build_block_dictionary(sc.grid, sc.num_elements);
  FmlmSolver solver(obs.Y, dict, SolverConfig{});
  solver.step();
  for (auto _ : state) {
    benchmark::DoNotOptimize(solver.propose());
  }
}
BENCHMARK(BM_ProposeAction)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
