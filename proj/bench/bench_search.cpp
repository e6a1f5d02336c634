// Parallel vs serial exact cosine search over a random index.
#include <benchmark/benchmark.h>

#include <random>

#include "hwthreat/retrieval.hpp"

namespace {

hwthreat::VectorIndex random_index(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  hwthreat::VectorIndex index(dim);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(dim);
    for (auto& x : v) x = g(rng);
    index.add("c" + std::to_string(i), hwthreat::EmbeddingVector::make(std::move(v)), hwthreat::DocKind::kAttackKnowledge);
  }
  return index;
}

hwthreat::EmbeddingVector random_query(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> v(dim);
  for (auto& x : v) x = g(rng);
  return hwthreat::EmbeddingVector::make(std::move(v));
}

void BM_SearchParallel(benchmark::State& state) {
  std::mt19937_64 rng(7);
  auto index = random_index(static_cast<std::size_t>(state.range(0)), 256, rng);
  auto q = random_query(256, rng);
  for (auto _ : state) benchmark::DoNotOptimize(index.search(q, 8));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SearchSerial(benchmark::State& state) {
  std::mt19937_64 rng(7);
  auto index = random_index(static_cast<std::size_t>(state.range(0)), 256, rng);
  auto q = random_query(256, rng);
  for (auto _ : state) benchmark::DoNotOptimize(index.search_serial(q, 8));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_SearchParallel)->Arg(1000)->Arg(10000)->Arg(50000);
BENCHMARK(BM_SearchSerial)->Arg(1000)->Arg(10000)->Arg(50000);

BENCHMARK_MAIN();
