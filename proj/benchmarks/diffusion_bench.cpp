#include <benchmark/benchmark.h>

#include "spatial/diffusion.hpp"
#include "spatial/energies.hpp"
#include "spatial/random.hpp"

namespace {

using namespace spatial;

LatentGrid noise(GridShape shape, std::uint64_t seed) {
  Rng rng(seed);
  LatentGrid g(shape);
  for (double& v : g.values()) v = standard_normal(rng);
  return g;
}

void BM_DdimStep(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto s = DDIMSchedule::linear(100);
  const auto z = noise({side, side, 4}, 1);
  const auto eps = noise({side, side, 4}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ddim_step(z, 50, eps, s));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(z.size()));
}
BENCHMARK(BM_DdimStep)->Arg(8)->Arg(64);

void BM_Enhancement(benchmark::State& state) {
  const auto s = DDIMSchedule::linear(100);
  const GaussianOracleNetwork net(0.0, 1.0, s);
  const auto z = noise({8, 8, 4}, 3);
  const auto phases = enhancement_phases(100, 0.7);
  for (auto _ : state) benchmark::DoNotOptimize(run_enhancement(z, net, net, phases, s));
}
BENCHMARK(BM_Enhancement);

void BM_AttentionControlGradient(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  Matrix w(4, 8), k(16, 8);
  for (double& v : w.data()) v = standard_normal(rng);
  for (double& v : k.data()) v = standard_normal(rng);
  Mask m(side, side);
  for (std::size_t u = 0; u < m.size() / 2; ++u) m.set(u, true);
  const AttentionControlEnergy e(CrossAttentionProbe(w, k), m, {1, 5}, EnergyConfig{});
  const auto z = noise({side, side, 4}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(e.gradient(z));
}
BENCHMARK(BM_AttentionControlGradient)->Arg(8)->Arg(32);

}  // namespace
