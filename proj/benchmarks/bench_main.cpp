#include "vcam/estimation.hpp"
#include "vcam/identification.hpp"
#include "vcam/simulation.hpp"
#include "vcam/splines.hpp"

#include <benchmark/benchmark.h>

using namespace vcam;

namespace {

void BM_SplineEval(benchmark::State& state) {
  const auto basis = SplineBasis::uniform(3, static_cast<int>(state.range(0)));
  double x = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(basis.eval_scaled(x));
    x += 0.618034;
    if (x > 1.0) x -= 1.0;
  }
}
BENCHMARK(BM_SplineEval)->Arg(4)->Arg(16)->Arg(64);

void BM_DerivativeGram(benchmark::State& state) {
  const auto basis = SplineBasis::uniform(3, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(derivative_gram(basis, 1, true));
}
BENCHMARK(BM_DerivativeGram)->Arg(4)->Arg(16)->Arg(64);

void BM_ThreeStepFit(benchmark::State& state) {
  RngStream rng(1, 1);
  const auto sim = generate_example1(static_cast<int>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(fit_three_step(sim.data, EstimationConfig{}, 25, 4));
}
BENCHMARK(BM_ThreeStepFit)->Arg(300)->Arg(900)->Unit(benchmark::kMillisecond);

void BM_Identify(benchmark::State& state) {
  RngStream rng(1, 2);
  const auto sim = generate_example2(static_cast<int>(state.range(0)), rng);
  const VcamFit fit = fit_three_step(sim.data, EstimationConfig{}, 30, 3);
  for (auto _ : state) benchmark::DoNotOptimize(identify(sim.data, fit, PenaltyConfig{}));
}
BENCHMARK(BM_Identify)->Arg(600)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
