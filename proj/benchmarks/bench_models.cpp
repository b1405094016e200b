#include <benchmark/benchmark.h>

#include "photocorr/models.hpp"

using namespace photocorr;

void BM_Kernel(benchmark::State& state) {
  const double sigma = static_cast<double>(state.range(0));
  double t = -30'000.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(exp_gauss_kernel(t, 3110.0, sigma));
    t = t > 30'000.0 ? -30'000.0 : t + 7.3;
  }
}
BENCHMARK(BM_Kernel)->Arg(0)->Arg(21)->Arg(50);

void BM_HbtModelBinned(benchmark::State& state) {
  const auto spec = HistogramSpec::symmetric(50, 37'500);
  HbtModelParams p;
  p.g2_zero = 0.006;
  for (auto _ : state) {
    benchmark::DoNotOptimize(bin_average(spec, [&](double t) { return hbt_model(t, p); }));
  }
}
BENCHMARK(BM_HbtModelBinned)->Unit(benchmark::kMicrosecond);

void BM_AnalyticVisibility(benchmark::State& state) {
  HomModelParams p;
  p.dip_contrast = 0.95;
  for (auto _ : state) benchmark::DoNotOptimize(analytic_visibility(400.0, p));
}
BENCHMARK(BM_AnalyticVisibility)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
