#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "wmlab/experiments.hpp"

using namespace wmlab;

namespace {

GridPtr nested(double lambda) { return make_nested_grid(64.0, 2048, lambda / 64.0); }

}  // namespace

static void BM_Rhs(benchmark::State& st) {
  auto g = nested(std::pow(10.0, -static_cast<double>(st.range(0))));
  auto s = two_bubble({std::pow(10.0, -static_cast<double>(st.range(0))), 1.0, 1}, g);
  auto [u, ut] = to_4d(s);
  for (auto _ : st) benchmark::DoNotOptimize(rhs(u.values(), *g));
  st.counters["nodes"] = static_cast<double>(g->size());
}
BENCHMARK(BM_Rhs)->Arg(1)->Arg(2)->Arg(3);

static void BM_Step(benchmark::State& st) {
  auto g = nested(1e-2);
  auto s = two_bubble({1e-2, 1.0, 1}, g);
  const double dt = 0.5 * g->h_min();
  for (auto _ : st) benchmark::DoNotOptimize(step(s, dt));
}
BENCHMARK(BM_Step);

static void BM_Energy(benchmark::State& st) {
  auto g = nested(1e-2);
  auto s = two_bubble({1e-2, 1.0, 1}, g);
  for (auto _ : st) benchmark::DoNotOptimize(energy(s));
}
BENCHMARK(BM_Energy);

static void BM_DistanceObjective(benchmark::State& st) {
  auto g = nested(1e-2);
  auto s = make_perturbed_two_bubble({1e-2, 1.0, 1}, {0.02, 0.02, 3.0, 1.0}, g);
  DistanceObjective obj(s);
  for (auto _ : st) benchmark::DoNotOptimize(obj({1.1e-2, 0.9, 1}));
}
BENCHMARK(BM_DistanceObjective);

static void BM_Distance(benchmark::State& st) {
  auto g = nested(1e-2);
  auto s = make_perturbed_two_bubble({1e-2, 1.0, 1}, {0.02, 0.02, 3.0, 1.0}, g);
  for (auto _ : st) benchmark::DoNotOptimize(distance(s));
}
BENCHMARK(BM_Distance)->Unit(benchmark::kMillisecond);

static void BM_FitModulation(benchmark::State& st) {
  auto g = nested(1e-3);
  auto s = two_bubble({1e-3, 1.0, 1}, g);
  ModConfig cfg;
  for (auto _ : st) benchmark::DoNotOptimize(fit_modulation(s, cfg, {2e-3, 0.8, 1}));
}
BENCHMARK(BM_FitModulation)->Unit(benchmark::kMillisecond);

static void BM_BlowupData(benchmark::State& st) {
  const double ell = ell_of_t(0.1).first;
  auto g = nested(ell);
  for (auto _ : st) benchmark::DoNotOptimize(make_blowup_data(0.1, g));
}
BENCHMARK(BM_BlowupData)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
