#include <benchmark/benchmark.h>

#include <vector>

#include "emlab/drift_catalog.hpp"
#include "emlab/em_engine.hpp"
#include "emlab/kolmogorov.hpp"
#include "emlab/rng_paths.hpp"
#include "emlab/zvonkin.hpp"

namespace {

void BM_Philox(benchmark::State& state) {
  emlab::Philox4x32::Counter counter{0, 0, 0, 0};
  const emlab::Philox4x32::Key key{0x12345678u, 0x9abcdef0u};
  for (auto _ : state) {
    counter[0]++;
    benchmark::DoNotOptimize(emlab::Philox4x32::Apply(counter, key));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Philox);

void BM_TableauGenerate(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  std::uint64_t path = 0;
  for (auto _ : state) {
    auto tableau = emlab::BrownianTableau::Generate(emlab::PathSeed{7, path++}, 1, n, 1.0);
    benchmark::DoNotOptimize(tableau.ValueAtIndex(n));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_TableauGenerate)->Arg(1 << 10)->Arg(1 << 14);

void BM_EmPath(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  const emlab::DriftSpec drift = emlab::Builtin("sign", 1);
  const auto tableau = emlab::BrownianTableau::Generate(emlab::PathSeed{7, 0}, 1, n, 1.0);
  const std::vector<double> x0{0.0};
  for (auto _ : state) {
    auto path = emlab::SimulateEm(drift, tableau, n, x0);
    benchmark::DoNotOptimize(path.State(n)[0]);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_EmPath)->Arg(1 << 10)->Arg(1 << 14);

void BM_ScaleTable(benchmark::State& state) {
  const emlab::DriftSpec drift = emlab::Builtin("sin", 1);
  for (auto _ : state) {
    auto table = emlab::BuildScaleTable(drift, 0.0, 3.0, 1e-3);
    benchmark::DoNotOptimize(table.Phi(0.5));
  }
}
BENCHMARK(BM_ScaleTable)->Unit(benchmark::kMillisecond);

void BM_HeatMildSolve(benchmark::State& state) {
  const emlab::SpaceGrid space{1, state.range(0), 8.0};
  const emlab::TimeGrid time{1.0, 64};
  const auto g = [](double, std::span<const double> x) { return x[0] > 0.0 ? 1.0 : -1.0; };
  for (auto _ : state) {
    auto field = emlab::HeatMildSolve(g, space, time);
    benchmark::DoNotOptimize(field.Value(64, 0));
  }
}
BENCHMARK(BM_HeatMildSolve)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
