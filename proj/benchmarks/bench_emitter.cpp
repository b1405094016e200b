#include <benchmark/benchmark.h>

#include "photocorr/emitter.hpp"

using namespace photocorr;

void BM_GeneratePhotons(benchmark::State& state) {
  EmitterParams p;
  p.p_two = 0.003;
  const std::int64_t pulses = state.range(0);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(generate_photons(p, pulses, ++seed));
  state.SetItemsProcessed(state.iterations() * pulses);
  state.SetLabel("items = pulses");
}
BENCHMARK(BM_GeneratePhotons)->Arg(1'000'000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
