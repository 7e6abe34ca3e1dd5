#include "sciret/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "jsonl.hpp"
#include "sciret/rng.hpp"

namespace sciret {

using detail::json;

namespace {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double sum = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    sum += diff * diff;
  }
  return sum;
}

void check_points(const Points& points) {
  if (points.empty()) throw InputError("clustering needs at least one point");
  const std::size_t dim = points.front().size();
  if (dim == 0) throw InputError("clustering needs non-empty points");
  for (const auto& p : points) {
    if (p.size() != dim) throw InputError("clustering points must share one dimension");
  }
}

// k-means++: first centroid uniform, the rest drawn proportionally to the
// squared distance from the nearest chosen centroid. When every remaining
// point coincides with a chosen centroid the draw degrades to uniform.
std::vector<std::vector<double>> seed_centroids(const Points& points, int k, Rng& rng) {
  const std::size_t n = points.size();
  std::vector<std::vector<double>> centroids;
  centroids.reserve(static_cast<std::size_t>(k));
  centroids.push_back(points[rng.next_below(n)]);

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i], centroids[0]);

  while (centroids.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (const double v : d2) total += v;
    std::size_t pick = 0;
    if (total <= 0.0) {
      pick = rng.next_below(n);
    } else {
      const double r = rng.next_double() * total;
      double cum = 0.0;
      pick = n - 1;  // guards against r landing on the accumulated rounding tail
      for (std::size_t i = 0; i < n; ++i) {
        cum += d2[i];
        if (r < cum) {
          pick = i;
          break;
        }
      }
    }
    centroids.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points[i], centroids.back()));
    }
  }
  return centroids;
}

std::vector<int> assign_points(const Points& points,
                               const std::vector<std::vector<double>>& centroids) {
  std::vector<int> assign(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    int best = 0;
    double best_d2 = squared_distance(points[i], centroids[0]);
    for (std::size_t j = 1; j < centroids.size(); ++j) {
      const double d2 = squared_distance(points[i], centroids[j]);
      if (d2 < best_d2) {  // strict: ties stay with the lower index
        best_d2 = d2;
        best = static_cast<int>(j);
      }
    }
    assign[i] = best;
  }
  return assign;
}

// Any empty cluster is re-seeded at the point farthest from its currently
// assigned centroid, which keeps the Lloyd objective monotone: that point's
// contribution drops to zero and every other term is untouched. Points that
// are the sole member of their cluster stay put so the fix never creates a
// new hole.
void reseed_empty_clusters(const Points& points,
                           std::vector<std::vector<double>>& centroids,
                           std::vector<int>& assign) {
  const int k = static_cast<int>(centroids.size());
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (const int a : assign) ++sizes[static_cast<std::size_t>(a)];
  for (int j = 0; j < k; ++j) {
    if (sizes[static_cast<std::size_t>(j)] > 0) continue;
    std::size_t worst = points.size();
    double worst_d2 = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (sizes[static_cast<std::size_t>(assign[i])] < 2) continue;
      const double d2 =
          squared_distance(points[i], centroids[static_cast<std::size_t>(assign[i])]);
      if (d2 > worst_d2) {
        worst_d2 = d2;
        worst = i;
      }
    }
    if (worst == points.size()) continue;  // k > n would be the only way here
    --sizes[static_cast<std::size_t>(assign[worst])];
    assign[worst] = j;
    sizes[static_cast<std::size_t>(j)] = 1;
    centroids[static_cast<std::size_t>(j)] = points[worst];
  }
}

std::vector<std::vector<double>> recompute_centroids(const Points& points,
                                                     const std::vector<int>& assign,
                                                     int k) {
  const std::size_t dim = points.front().size();
  std::vector<std::vector<double>> centroids(static_cast<std::size_t>(k),
                                             std::vector<double>(dim, 0.0));
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto& c = centroids[static_cast<std::size_t>(assign[i])];
    for (std::size_t d = 0; d < dim; ++d) c[d] += points[i][d];
    ++counts[static_cast<std::size_t>(assign[i])];
  }
  for (int j = 0; j < k; ++j) {
    const std::size_t m = counts[static_cast<std::size_t>(j)];
    if (m == 0) continue;  // reseeding upstream keeps this from mattering
    for (double& v : centroids[static_cast<std::size_t>(j)]) v /= static_cast<double>(m);
  }
  return centroids;
}

double lloyd_objective(const Points& points,
                       const std::vector<std::vector<double>>& centroids,
                       const std::vector<int>& assign) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    total += squared_distance(points[i], centroids[static_cast<std::size_t>(assign[i])]);
  }
  return total;
}

constexpr int kMaxLloydIterations = 100;

KMeansResult kmeans_single(const Points& points, int k, std::uint64_t seed) {
  Rng rng(seed);
  KMeansResult result;
  result.centroids = seed_centroids(points, k, rng);

  std::vector<int> previous;
  for (int iter = 0; iter < kMaxLloydIterations; ++iter) {
    std::vector<int> assign = assign_points(points, result.centroids);
    reseed_empty_clusters(points, result.centroids, assign);
    if (assign == previous) break;  // assignment fixpoint
    result.centroids = recompute_centroids(points, assign, k);
    result.assignments = assign;
    previous = std::move(assign);
    ++result.iterations;
    result.objective_trace.push_back(
        lloyd_objective(points, result.centroids, result.assignments));
  }
  result.objective = result.objective_trace.empty()
                         ? lloyd_objective(points, result.centroids, result.assignments)
                         : result.objective_trace.back();
  return result;
}

}  // namespace

KMeansResult kmeans_fit(const Points& points, int k, std::uint64_t seed, int restarts) {
  check_points(points);
  if (k < 1) throw InputError("kmeans: k must be >= 1");
  if (static_cast<std::size_t>(k) > points.size()) {
    throw InputError("kmeans: k=" + std::to_string(k) + " exceeds point count " +
                     std::to_string(points.size()));
  }
  if (restarts < 1) throw InputError("kmeans: restarts must be >= 1");

  Rng seeder(seed);
  KMeansResult best;
  bool have_best = false;
  for (int r = 0; r < restarts; ++r) {
    KMeansResult candidate = kmeans_single(points, k, seeder.next_u64());
    if (!have_best || candidate.objective < best.objective) {
      best = std::move(candidate);
      have_best = true;
    }
  }
  return best;
}

double silhouette_macro(const Points& points, const std::vector<int>& assignments) {
  check_points(points);
  if (assignments.size() != points.size()) {
    throw InputError("silhouette: assignment count does not match point count");
  }
  int k = 0;
  for (const int a : assignments) {
    if (a < 0) throw InputError("silhouette: negative cluster index");
    k = std::max(k, a + 1);
  }
  if (k < 2) throw InputError("silhouette needs at least 2 clusters");

  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < points.size(); ++i) {
    members[static_cast<std::size_t>(assignments[i])].push_back(i);
  }
  for (int j = 0; j < k; ++j) {
    if (members[static_cast<std::size_t>(j)].empty()) {
      throw InputError("silhouette: cluster " + std::to_string(j) + " is empty");
    }
  }

  double macro = 0.0;
  for (int c = 0; c < k; ++c) {
    const auto& own = members[static_cast<std::size_t>(c)];
    double cluster_sum = 0.0;
    for (const std::size_t i : own) {
      double s = 0.0;
      if (own.size() > 1) {
        double a_sum = 0.0;
        for (const std::size_t other : own) {
          if (other == i) continue;
          a_sum += std::sqrt(squared_distance(points[i], points[other]));
        }
        const double a = a_sum / static_cast<double>(own.size() - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c2 = 0; c2 < k; ++c2) {
          if (c2 == c) continue;
          const auto& theirs = members[static_cast<std::size_t>(c2)];
          double b_sum = 0.0;
          for (const std::size_t other : theirs) {
            b_sum += std::sqrt(squared_distance(points[i], points[other]));
          }
          b = std::min(b, b_sum / static_cast<double>(theirs.size()));
        }
        const double denom = std::max(a, b);
        s = denom == 0.0 ? 0.0 : (b - a) / denom;
      }
      cluster_sum += s;
    }
    macro += cluster_sum / static_cast<double>(own.size());
  }
  return macro / static_cast<double>(k);
}

SelectKResult select_k(const Points& points, int k_min, int k_max, std::uint64_t seed) {
  check_points(points);
  const int lo = std::max(k_min, 2);
  const int hi = std::min<std::int64_t>(k_max, static_cast<std::int64_t>(points.size()));

  SelectKResult result;
  if (lo > hi) {
    result.unclusterable = true;
    return result;
  }
  bool have_best = false;
  for (int k = lo; k <= hi; ++k) {
    KMeansResult fit =
        kmeans_fit(points, k, derive_seed(seed, "kmeans:k=" + std::to_string(k)));
    const double sil = silhouette_macro(points, fit.assignments);
    if (!have_best || sil > result.silhouette) {  // strict: ties keep the smaller k
      result.k = k;
      result.silhouette = sil;
      result.fit = std::move(fit);
      have_best = true;
    }
  }
  return result;
}

std::optional<int> ClusteredPool::cluster_of(std::string_view doc_id) const {
  auto it = assignments.find(std::string(doc_id));
  if (it == assignments.end()) return std::nullopt;
  return it->second;
}

ClusteredPool cluster_pool(const CandidatePool& pool, const EmbeddingMatrix& doc_embeddings,
                           const std::optional<std::string>& gold_doc_id, int k_min,
                           int k_max, std::uint64_t seed) {
  if (pool.entries.empty()) {
    throw InputError("cannot cluster empty pool for query " + pool.query_id);
  }
  Points points;
  points.reserve(pool.entries.size());
  std::set<std::string> seen;
  std::vector<std::string> missing;
  for (const PoolEntry& e : pool.entries) {
    if (!seen.insert(e.doc_id).second) {
      throw InputError("pool for query " + pool.query_id + " repeats doc " + e.doc_id);
    }
    const auto row = doc_embeddings.row_of(e.doc_id);
    if (!row) {
      missing.push_back(e.doc_id);
      continue;
    }
    const auto src = doc_embeddings.row(*row);
    points.emplace_back(src.begin(), src.end());
  }
  if (!missing.empty()) {
    std::string msg = "pool for query " + pool.query_id + " has " +
                      std::to_string(missing.size()) + " doc(s) without embeddings:";
    for (const auto& id : missing) msg += " " + id;
    throw InputError(msg);
  }

  const SelectKResult selected =
      select_k(points, k_min, k_max, derive_seed(seed, "cluster:" + pool.query_id));

  ClusteredPool out;
  out.query_id = pool.query_id;
  if (selected.unclusterable) {
    out.unclusterable = true;
    return out;
  }
  out.k = selected.k;
  out.silhouette = selected.silhouette;
  out.centroids = selected.fit.centroids;
  for (std::size_t i = 0; i < pool.entries.size(); ++i) {
    out.assignments.emplace(pool.entries[i].doc_id, selected.fit.assignments[i]);
  }
  if (gold_doc_id) {
    if (const auto cluster = out.cluster_of(*gold_doc_id)) out.gold_cluster = *cluster;
  }
  return out;
}

int nearest_cluster(const ClusteredPool& pool) {
  if (pool.unclusterable) {
    throw InputError("nearest_cluster: pool for query " + pool.query_id +
                     " is unclusterable");
  }
  if (!pool.gold_cluster) {
    throw GoldAbsentError("nearest_cluster: no gold cluster for query " + pool.query_id);
  }
  const int gold = *pool.gold_cluster;
  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int j = 0; j < pool.k; ++j) {
    if (j == gold) continue;
    const double d2 = squared_distance(pool.centroids[static_cast<std::size_t>(j)],
                                       pool.centroids[static_cast<std::size_t>(gold)]);
    if (d2 < best_d2) {  // strict: ties keep the lower index
      best_d2 = d2;
      best = j;
    }
  }
  if (best < 0) {
    throw InputError("nearest_cluster: query " + pool.query_id +
                     " has no non-gold cluster");
  }
  return best;
}

void save_clustered(std::span<const ClusteredPool> pools, const std::string& path) {
  std::ofstream out = detail::open_out(path);
  for (const ClusteredPool& pool : pools) {
    json obj;
    obj["query_id"] = pool.query_id;
    obj["unclusterable"] = pool.unclusterable;
    obj["k"] = pool.k;
    obj["silhouette_macro"] = pool.silhouette;
    if (pool.gold_cluster) {
      obj["gold_cluster"] = *pool.gold_cluster;
    } else {
      obj["gold_cluster"] = nullptr;
    }
    // unordered_map iteration order is unspecified, so sort for stable bytes.
    std::vector<std::pair<std::string, int>> sorted(pool.assignments.begin(),
                                                    pool.assignments.end());
    std::sort(sorted.begin(), sorted.end());
    json assignments = json::object();
    for (const auto& [doc, cluster] : sorted) assignments[doc] = cluster;
    obj["assignments"] = std::move(assignments);
    obj["centroids"] = pool.centroids;
    out << obj.dump() << "\n";
  }
  if (!out) throw InputError("failed while writing " + path);
}

std::vector<ClusteredPool> load_clustered(const std::string& path) {
  std::vector<ClusteredPool> pools;
  detail::for_each_jsonl(path, [&](std::size_t line, const json& obj) {
    ClusteredPool pool;
    pool.query_id = detail::require_string(obj, "query_id", path, line);
    pool.unclusterable = detail::require_field(obj, "unclusterable", path, line).get<bool>();
    pool.k = detail::require_field(obj, "k", path, line).get<int>();
    pool.silhouette = detail::require_field(obj, "silhouette_macro", path, line).get<double>();
    if (auto it = obj.find("gold_cluster"); it != obj.end() && !it->is_null()) {
      pool.gold_cluster = it->get<int>();
    }
    const json& assignments = detail::require_field(obj, "assignments", path, line);
    for (auto it = assignments.begin(); it != assignments.end(); ++it) {
      pool.assignments.emplace(it.key(), it.value().get<int>());
    }
    const json& centroids = detail::require_field(obj, "centroids", path, line);
    for (const json& c : centroids) {
      pool.centroids.push_back(c.get<std::vector<double>>());
    }
    pools.push_back(std::move(pool));
  });
  return pools;
}

}  // namespace sciret
