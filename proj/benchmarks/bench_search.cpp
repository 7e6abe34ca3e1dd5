#include <benchmark/benchmark.h>

#include <cmath>
#include <string>
#include <vector>

#include "sciret/index.hpp"
#include "sciret/rng.hpp"

namespace {

sciret::EmbeddingMatrix random_matrix(std::size_t rows, int dim, std::uint64_t seed) {
  sciret::Rng rng(seed);
  sciret::EmbeddingMatrix m;
  m.dim = dim;
  m.ids.reserve(rows);
  m.data.reserve(rows * static_cast<std::size_t>(dim));
  for (std::size_t i = 0; i < rows; ++i) {
    m.ids.push_back("doc" + std::to_string(i));
    double norm2 = 0.0;
    std::vector<float> row(static_cast<std::size_t>(dim));
    for (float& v : row) {
      v = static_cast<float>(rng.next_double() * 2.0 - 1.0);
      norm2 += static_cast<double>(v) * v;
    }
    const float scale = norm2 > 0.0 ? static_cast<float>(1.0 / std::sqrt(norm2)) : 1.0f;
    for (const float v : row) m.data.push_back(v * scale);
  }
  m.rebuild_lookup();
  return m;
}

void bm_search_topk(benchmark::State& state) {
  const std::size_t docs = static_cast<std::size_t>(state.range(0));
  const int dim = static_cast<int>(state.range(1));
  const int k = static_cast<int>(state.range(2));
  const sciret::FlatIndex index(random_matrix(docs, dim, 7));
  const sciret::EmbeddingMatrix queries = random_matrix(16, dim, 8);

  std::size_t q = 0;
  for (auto _ : state) {
    const sciret::CandidatePool pool =
        index.search_topk(queries.row(q % queries.rows()), k, "q");
    benchmark::DoNotOptimize(pool.entries.data());
    ++q;
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(docs));
}

void bm_batch_search(benchmark::State& state) {
  const unsigned workers = static_cast<unsigned>(state.range(0));
  const sciret::FlatIndex index(random_matrix(10000, 64, 7));
  const sciret::EmbeddingMatrix queries = random_matrix(64, 64, 9);

  for (auto _ : state) {
    const auto pools = index.batch_search(queries, 100, workers);
    benchmark::DoNotOptimize(pools.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(queries.rows()));
}

}  // namespace

BENCHMARK(bm_search_topk)
    ->Args({10000, 64, 20})
    ->Args({10000, 64, 200})
    ->Args({10000, 256, 20})
    ->Args({50000, 64, 200});
BENCHMARK(bm_batch_search)->Arg(1)->Arg(2)->Arg(4)->Arg(8)
    ->Unit(benchmark::kMillisecond);
