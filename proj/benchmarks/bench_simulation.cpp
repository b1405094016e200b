#include <benchmark/benchmark.h>

#include "photocorr/pipeline.hpp"

using namespace photocorr;

namespace {

class CountSink final : public TagSink {
 public:
  void consume(std::span<const TimeTag> a, std::span<const TimeTag> b, std::int64_t) override {
    n += a.size() + b.size();
  }
  std::uint64_t n = 0;
};

}  // namespace

void BM_RunHbt(benchmark::State& state) {
  EmitterParams e;
  e.p_two = 0.003;
  for (auto _ : state) {
    CountSink sink;
    run_hbt(e, HbtConfig{}, state.range(0), 1, sink);
    benchmark::DoNotOptimize(sink.n);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
  state.SetLabel("items = pulses");
}
BENCHMARK(BM_RunHbt)->Arg(1'000'000)->Unit(benchmark::kMillisecond);

void BM_RunHomCorrelated(benchmark::State& state) {
  EmitterParams e;
  e.v_intrinsic = 0.95;
  for (auto _ : state) {
    CorrelatorSink sink(HistogramSpec::symmetric(50, 37'500));
    run_hom(e, HomConfig{}, state.range(0), 1, sink);
    benchmark::DoNotOptimize(sink.histogram().total_pairs);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
  state.SetLabel("items = pulses");
}
BENCHMARK(BM_RunHomCorrelated)->Arg(1'000'000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
