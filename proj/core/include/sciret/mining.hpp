#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sciret/clustering.hpp"
#include "sciret/index.hpp"
#include "sciret/types.hpp"

namespace sciret {

enum class MiningStrategy {
  IN_BATCH_EXPORT,    // no sampling here; batches are exported for trainers
  ANCE,               // top-retrieved negatives from the whole pool
  CLUSTER_GOLD,       // negatives from the gold document's cluster
  CLUSTER_NEAREST,    // negatives from the cluster nearest to the gold one
  CLUSTER_NON_GOLD,   // negatives from everywhere but the gold cluster
};

MiningStrategy parse_strategy(std::string_view text);
std::string_view to_string(MiningStrategy strategy);

struct Triple {
  std::string query_id;
  std::string positive_doc_id;
  std::vector<std::string> negative_doc_ids;
  MiningStrategy strategy = MiningStrategy::ANCE;
  std::uint64_t seed = 0;
  std::vector<std::string> flags;  // SHORTFALL, FALLBACK
};

// Pool entries that may serve as negatives: the gold document and the top
// exclude_top_m ranks are removed, everything else stays in rank order.
std::vector<PoolEntry> eligible_candidates(const CandidatePool& pool,
                                           std::string_view gold_doc_id,
                                           int exclude_top_m);

// Draws n negatives for one query. Cluster strategies need `clustered`
// (pass nullptr for ANCE) and fall back to ANCE with a FALLBACK flag when the
// pool is unclusterable. Fewer eligible candidates than n yields all of them
// plus a SHORTFALL flag. Sampling is uniform without replacement, seeded per
// query off `seed`, so per-query results are independent of processing order.
Triple mine(const CandidatePool& pool, std::string_view gold_doc_id,
            MiningStrategy strategy, const ClusteredPool* clustered, int n,
            int exclude_top_m, std::uint64_t seed);

// Triple JSONL:
//   {"query_id": "...", "positive_doc_id": "...",
//    "negative_doc_ids": ["..."], "strategy": "ANCE", "seed": 7, "flags": []}
// Triples are written sorted by query_id. An empty input still produces the
// file plus a summary line on standard error.
void export_triples(std::span<const Triple> triples, const std::string& path);
std::vector<Triple> load_triples(const std::string& path);

struct InBatchSummary {
  std::size_t batches = 0;
  std::size_t degenerate = 0;  // batches of size 1: no in-batch negatives
};

// Shuffles query ids with the given seed, slices them into batches of
// batch_size (final batch may be short), and writes one JSONL line per batch:
//   {"batch_index": 0, "query_ids": [...], "in_batch_negatives": 15,
//    "flags": []}
// in_batch_negatives is batch size minus one; a singleton batch gets the
// DEGENERATE flag.
InBatchSummary export_inbatch_manifest(std::span<const std::string> query_ids,
                                       int batch_size, std::uint64_t seed,
                                       const std::string& path);

}  // namespace sciret
