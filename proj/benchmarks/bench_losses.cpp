#include <benchmark/benchmark.h>

#include "osb/gradcheck.hpp"
#include "osb/losses.hpp"

namespace {

void BM_TotalLoss(benchmark::State& state) {
  osb::Rng rng(5);
  osb::EpisodeShape shape;
  shape.gallery = static_cast<std::size_t>(state.range(0));
  shape.mated = 2 * shape.gallery;
  shape.nonmated = shape.gallery;
  shape.dim = 64;
  const auto ep = osb::random_episode(rng, shape);
  const osb::LossHyperparams hp;
  for (auto _ : state) benchmark::DoNotOptimize(osb::total_loss(ep, hp));
}
BENCHMARK(BM_TotalLoss)->Arg(8)->Arg(32)->Arg(128);

}  // namespace
