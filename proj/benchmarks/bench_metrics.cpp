#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "osb/metrics.hpp"
#include "osb/rng.hpp"
#include "osb/similarity.hpp"

namespace {

osb::EmbeddingSet random_set(std::size_t subjects, std::size_t per_subject, std::size_t dim, std::uint64_t seed) {
  osb::Rng rng(seed);
  std::vector<osb::Embedding> e;
  for (std::size_t s = 0; s < subjects; ++s) {
    for (std::size_t k = 0; k < per_subject; ++k) {
      osb::Feature f(dim);
      for (auto& v : f) v = rng.normal();
      e.push_back({"s" + std::to_string(s), std::to_string(k), f});
    }
  }
  return osb::EmbeddingSet(std::move(e), dim, osb::Metric::Cosine);
}

void BM_ScoreMatrix(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto gallery = random_set(n, 2, 128, 1);
  const auto probes = random_set(n, 1, 128, 2);
  const osb::SimilarityConfig cfg{osb::Metric::Cosine};
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        osb::score_matrix(probes, gallery, cfg, osb::GalleryAggregation::MeanFeature, 0,
                          static_cast<unsigned>(state.range(1))));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_ScoreMatrix)->Args({256, 1})->Args({256, 4})->Args({1024, 1})->Args({1024, 4});

void BM_FnirAtFpir(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto gallery = random_set(n, 1, 32, 3);
  auto probes = random_set(n, 1, 32, 4);
  std::vector<osb::Embedding> mixed(probes.begin(), probes.end());
  for (std::size_t i = 0; i < n / 5; ++i) mixed[i].subject_id = "u" + std::to_string(i);
  const osb::EmbeddingSet probe_set(std::move(mixed), 32, osb::Metric::Cosine);
  const auto m = osb::score_matrix(probe_set, gallery, {osb::Metric::Cosine}, osb::GalleryAggregation::MeanFeature, 0);
  const auto flags = m.mated_flags();
  const auto truth = m.probe_subjects();
  for (auto _ : state) benchmark::DoNotOptimize(osb::fnir_at_fpir(m, flags, truth, 0.01, 20));
}
BENCHMARK(BM_FnirAtFpir)->Arg(500)->Arg(2000);

}  // namespace
