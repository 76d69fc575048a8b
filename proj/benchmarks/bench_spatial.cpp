#include <benchmark/benchmark.h>

#include <random>

#include "storecycle/spatial.hpp"

using namespace storecycle::spatial;

namespace {

SpatialScene scene_with(int competitors) {
  std::mt19937_64 rng(competitors);
  std::uniform_real_distribution<double> pos(-2.0, 2.0);
  std::uniform_real_distribution<double> speed(0.02, 0.2);
  SpatialScene scene;
  scene.u = 2500.0;
  scene.focal.k = 0.05;
  for (int i = 0; i < competitors; ++i) {
    StoreSite s;
    s.index = i + 1;
    s.location = {pos(rng), pos(rng)};
    s.opening_time = 100.0 * pos(rng);
    s.k = speed(rng);
    scene.competitors.push_back(s);
  }
  return scene;
}

void BM_ClosedForm(benchmark::State& state) {
  double t = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(potential_customers_closed_form(3000.0, 1.535, 0.05, t));
    t += 0.25;
  }
}
BENCHMARK(BM_ClosedForm);

void BM_EquivalentDensity(benchmark::State& state) {
  const auto scene = scene_with(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(equivalent_density(scene));
}
BENCHMARK(BM_EquivalentDensity)->Arg(0)->Arg(1)->Arg(5)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_MonteCarlo(benchmark::State& state) {
  const auto scene = scene_with(5);
  MonteCarloConfig cfg;
  cfg.samples = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(potential_customers_mc(scene, 400.0, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MonteCarlo)->Arg(10'000)->Arg(1'000'000)->Unit(benchmark::kMillisecond);

}  // namespace
