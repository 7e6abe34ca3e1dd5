#include <benchmark/benchmark.h>

#include <cstddef>
#include <vector>

#include "sciret/clustering.hpp"
#include "sciret/rng.hpp"

namespace {

// `blobs` well-separated Gaussian-ish blobs of `per_blob` points each.
sciret::Points blob_points(int blobs, int per_blob, int dim, std::uint64_t seed) {
  sciret::Rng rng(seed);
  sciret::Points points;
  points.reserve(static_cast<std::size_t>(blobs) * per_blob);
  for (int b = 0; b < blobs; ++b) {
    for (int i = 0; i < per_blob; ++i) {
      std::vector<double> p(static_cast<std::size_t>(dim));
      for (int d = 0; d < dim; ++d) {
        const double center = d == b % dim ? 10.0 * (1 + b / dim) : 0.0;
        p[static_cast<std::size_t>(d)] = center + rng.next_double() - 0.5;
      }
      points.push_back(std::move(p));
    }
  }
  return points;
}

void bm_kmeans_fit(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const sciret::Points points = blob_points(k, 200 / k, 16, 3);
  for (auto _ : state) {
    const sciret::KMeansResult fit = sciret::kmeans_fit(points, k, 17);
    benchmark::DoNotOptimize(fit.objective);
  }
}

void bm_silhouette_macro(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const sciret::Points points = blob_points(4, n / 4, 16, 3);
  const sciret::KMeansResult fit = sciret::kmeans_fit(points, 4, 17);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sciret::silhouette_macro(points, fit.assignments));
  }
}

void bm_select_k(benchmark::State& state) {
  const sciret::Points points = blob_points(4, 50, 16, 3);
  for (auto _ : state) {
    const sciret::SelectKResult pick =
        sciret::select_k(points, 2, static_cast<int>(state.range(0)), 17);
    benchmark::DoNotOptimize(pick.k);
  }
}

}  // namespace

BENCHMARK(bm_kmeans_fit)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_silhouette_macro)->Arg(100)->Arg(200)->Arg(400);
BENCHMARK(bm_select_k)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);
