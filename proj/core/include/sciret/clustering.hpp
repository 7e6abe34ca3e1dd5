#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sciret/embedding.hpp"
#include "sciret/index.hpp"
#include "sciret/types.hpp"

namespace sciret {

using Points = std::vector<std::vector<double>>;

struct KMeansResult {
  std::vector<int> assignments;             // one cluster index per point
  std::vector<std::vector<double>> centroids;
  double objective = 0.0;                   // sum of squared distances
  int iterations = 0;                       // Lloyd rounds of the winning run
  std::vector<double> objective_trace;      // objective after each round
};

// k-means++ seeding followed by Lloyd iterations until the assignment reaches
// a fixpoint (at most 100 rounds). The whole procedure restarts `restarts`
// times from seeds drawn off `seed` and keeps the lowest objective, so a
// single call is already a best-of-restarts fit. Assignment ties go to the
// lower cluster index; every returned cluster is non-empty.
KMeansResult kmeans_fit(const Points& points, int k, std::uint64_t seed,
                        int restarts = 10);

// Macro silhouette: mean silhouette within each cluster first, then the
// unweighted mean across clusters, so small clusters count as much as big
// ones. Euclidean distances. Singleton points score 0, as does the degenerate
// a == b == 0 case. Needs at least 2 clusters, each non-empty.
double silhouette_macro(const Points& points, const std::vector<int>& assignments);

struct SelectKResult {
  bool unclusterable = false;  // no feasible k in [k_min, k_max] ∩ [2, n]
  int k = 0;
  double silhouette = 0.0;
  KMeansResult fit;
};

// Fits every feasible cluster count and keeps the macro-silhouette maximizer;
// ties go to the smaller k. Each candidate k derives its own seed, so growing
// the range never disturbs the other fits.
SelectKResult select_k(const Points& points, int k_min, int k_max, std::uint64_t seed);

// Clustered view of one candidate pool.
struct ClusteredPool {
  std::string query_id;
  bool unclusterable = false;
  int k = 0;
  double silhouette = 0.0;                  // macro silhouette of the kept fit
  std::optional<int> gold_cluster;          // set when the gold doc is in the pool
  std::vector<std::vector<double>> centroids;
  std::unordered_map<std::string, int> assignments;  // doc_id -> cluster

  std::optional<int> cluster_of(std::string_view doc_id) const;
};

// Clusters the pool's documents in embedding space. Every pool doc must have
// an embedding row; gold_doc_id is looked up in the pool to place the gold
// cluster.
ClusteredPool cluster_pool(const CandidatePool& pool, const EmbeddingMatrix& doc_embeddings,
                           const std::optional<std::string>& gold_doc_id, int k_min,
                           int k_max, std::uint64_t seed);

// Index of the non-gold cluster whose centroid sits closest to the gold
// centroid (Euclidean); ties go to the lower index. Requires a clusterable
// pool with a gold cluster.
int nearest_cluster(const ClusteredPool& pool);

// Clustered-pool JSONL:
//   {"query_id": "...", "unclusterable": false, "k": 4,
//    "silhouette_macro": 0.31, "gold_cluster": 2,
//    "assignments": {"doc": 0, ...}, "centroids": [[..], ..]}
void save_clustered(std::span<const ClusteredPool> pools, const std::string& path);
std::vector<ClusteredPool> load_clustered(const std::string& path);

}  // namespace sciret
