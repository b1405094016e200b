#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>

#include "photocorr/correlator.hpp"

using namespace photocorr;

namespace {

std::vector<TimeTag> sparse(std::size_t n, std::int64_t mean_gap_ps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> u(0, static_cast<std::int64_t>(n) * mean_gap_ps);
  std::vector<TimeTag> v(n);
  for (auto& t : v) t.timestamp_ps = u(rng);
  std::sort(v.begin(), v.end(),
            [](const TimeTag& x, const TimeTag& y) { return x.timestamp_ps < y.timestamp_ps; });
  return v;
}

// 10 MHz per stream, +-50 ns: about one pair per start.
void BM_CorrelateSparse(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = sparse(n, 100'000, 1);
  const auto b = sparse(n, 100'000, 2);
  const auto spec = HistogramSpec::symmetric(100, 50'000);
  const auto threads = static_cast<unsigned>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(correlate(a, b, spec, threads));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n));
  state.SetLabel("items = tags");
}
BENCHMARK(BM_CorrelateSparse)->Args({1'000'000, 1})->Args({1'000'000, 4})->UseRealTime()->Unit(benchmark::kMillisecond);

// 80 MHz-like density: many pairs per start.
void BM_CorrelateDense(benchmark::State& state) {
  const std::size_t n = 1'000'000;
  const auto a = sparse(n, 25'000, 3);
  const auto b = sparse(n, 25'000, 4);
  const auto spec = HistogramSpec::symmetric(50, 37'500);
  for (auto _ : state) benchmark::DoNotOptimize(correlate(a, b, spec, 1));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n));
}
BENCHMARK(BM_CorrelateDense)->Unit(benchmark::kMillisecond);

void BM_StartStop(benchmark::State& state) {
  const std::size_t n = 1'000'000;
  const auto a = sparse(n, 100'000, 5);
  const auto b = sparse(n, 100'000, 6);
  const auto spec = HistogramSpec(10, 0, 100'000);
  for (auto _ : state) benchmark::DoNotOptimize(correlate_start_stop(a, b, spec));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n));
}
BENCHMARK(BM_StartStop)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
