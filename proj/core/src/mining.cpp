#include "sciret/mining.hpp"

#include <algorithm>
#include <iostream>

#include "jsonl.hpp"
#include "sciret/rng.hpp"

namespace sciret {

using detail::json;

MiningStrategy parse_strategy(std::string_view text) {
  std::string up(text);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) {
    return c == '-' ? '_' : static_cast<char>(std::toupper(c));
  });
  if (up == "IN_BATCH_EXPORT") return MiningStrategy::IN_BATCH_EXPORT;
  if (up == "ANCE") return MiningStrategy::ANCE;
  if (up == "CLUSTER_GOLD") return MiningStrategy::CLUSTER_GOLD;
  if (up == "CLUSTER_NEAREST") return MiningStrategy::CLUSTER_NEAREST;
  if (up == "CLUSTER_NON_GOLD") return MiningStrategy::CLUSTER_NON_GOLD;
  throw InputError("unknown mining strategy: " + std::string(text));
}

std::string_view to_string(MiningStrategy strategy) {
  switch (strategy) {
    case MiningStrategy::IN_BATCH_EXPORT: return "IN_BATCH_EXPORT";
    case MiningStrategy::ANCE: return "ANCE";
    case MiningStrategy::CLUSTER_GOLD: return "CLUSTER_GOLD";
    case MiningStrategy::CLUSTER_NEAREST: return "CLUSTER_NEAREST";
    case MiningStrategy::CLUSTER_NON_GOLD: return "CLUSTER_NON_GOLD";
  }
  return "ANCE";
}

std::vector<PoolEntry> eligible_candidates(const CandidatePool& pool,
                                           std::string_view gold_doc_id,
                                           int exclude_top_m) {
  if (exclude_top_m < 0) throw InputError("exclude_top_m must be >= 0");
  std::vector<PoolEntry> eligible;
  eligible.reserve(pool.entries.size());
  for (const PoolEntry& e : pool.entries) {
    if (e.rank <= exclude_top_m) continue;
    if (e.doc_id == gold_doc_id) continue;
    eligible.push_back(e);
  }
  return eligible;
}

Triple mine(const CandidatePool& pool, std::string_view gold_doc_id,
            MiningStrategy strategy, const ClusteredPool* clustered, int n,
            int exclude_top_m, std::uint64_t seed) {
  if (strategy == MiningStrategy::IN_BATCH_EXPORT) {
    throw InputError("IN_BATCH_EXPORT does not sample; use export_inbatch_manifest");
  }
  if (n < 1) throw InputError("negatives_per_query must be >= 1");
  if (gold_doc_id.empty()) {
    throw GoldAbsentError("query " + pool.query_id + " has no gold document");
  }

  Triple triple;
  triple.query_id = pool.query_id;
  triple.positive_doc_id = std::string(gold_doc_id);
  triple.strategy = strategy;
  triple.seed = seed;

  const bool cluster_strategy = strategy == MiningStrategy::CLUSTER_GOLD ||
                                strategy == MiningStrategy::CLUSTER_NEAREST ||
                                strategy == MiningStrategy::CLUSTER_NON_GOLD;
  std::vector<PoolEntry> candidates = eligible_candidates(pool, gold_doc_id, exclude_top_m);

  if (cluster_strategy) {
    if (clustered == nullptr) {
      throw InputError("strategy " + std::string(to_string(strategy)) +
                       " needs a clustered pool for query " + pool.query_id);
    }
    if (clustered->query_id != pool.query_id) {
      throw InputError("clustered pool is for query " + clustered->query_id +
                       ", expected " + pool.query_id);
    }
    if (clustered->unclusterable) {
      // Too few candidates to cluster: degrade to plain pool sampling.
      triple.flags.push_back("FALLBACK");
    } else {
      if (!pool.contains(gold_doc_id) || !clustered->gold_cluster) {
        throw GoldAbsentError("gold document " + std::string(gold_doc_id) +
                              " is not in the pool for query " + pool.query_id);
      }
      const int gold_cluster = *clustered->gold_cluster;
      const int target = strategy == MiningStrategy::CLUSTER_NEAREST
                             ? nearest_cluster(*clustered)
                             : gold_cluster;
      std::vector<PoolEntry> filtered;
      for (PoolEntry& e : candidates) {
        const auto cluster = clustered->cluster_of(e.doc_id);
        if (!cluster) {
          throw InputError("doc " + e.doc_id + " in pool for query " + pool.query_id +
                           " has no cluster assignment");
        }
        const bool keep = strategy == MiningStrategy::CLUSTER_NON_GOLD
                              ? *cluster != gold_cluster
                              : *cluster == target;
        if (keep) filtered.push_back(std::move(e));
      }
      candidates = std::move(filtered);
    }
  }

  if (candidates.size() <= static_cast<std::size_t>(n)) {
    for (const PoolEntry& e : candidates) triple.negative_doc_ids.push_back(e.doc_id);
    if (candidates.size() < static_cast<std::size_t>(n)) {
      triple.flags.push_back("SHORTFALL");
    }
  } else {
    Rng rng(derive_seed(seed, "mine:" + pool.query_id));
    for (const std::size_t idx :
         rng.sample_without_replacement(candidates.size(), static_cast<std::size_t>(n))) {
      triple.negative_doc_ids.push_back(candidates[idx].doc_id);
    }
  }
  return triple;
}

void export_triples(std::span<const Triple> triples, const std::string& path) {
  std::vector<const Triple*> ordered;
  ordered.reserve(triples.size());
  for (const Triple& t : triples) ordered.push_back(&t);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Triple* a, const Triple* b) { return a->query_id < b->query_id; });

  std::ofstream out = detail::open_out(path);
  for (const Triple* t : ordered) {
    json obj;
    obj["query_id"] = t->query_id;
    obj["positive_doc_id"] = t->positive_doc_id;
    obj["negative_doc_ids"] = t->negative_doc_ids;
    obj["strategy"] = std::string(to_string(t->strategy));
    obj["seed"] = t->seed;
    obj["flags"] = t->flags;
    out << obj.dump() << "\n";
  }
  if (!out) throw InputError("failed while writing " + path);
  if (ordered.empty()) {
    std::cerr << "export_triples: no triples to export, wrote empty " << path << "\n";
  }
}

std::vector<Triple> load_triples(const std::string& path) {
  std::vector<Triple> triples;
  detail::for_each_jsonl(path, [&](std::size_t line, const json& obj) {
    Triple t;
    t.query_id = detail::require_string(obj, "query_id", path, line);
    t.positive_doc_id = detail::require_string(obj, "positive_doc_id", path, line);
    const json& negs = detail::require_field(obj, "negative_doc_ids", path, line);
    t.negative_doc_ids = negs.get<std::vector<std::string>>();
    t.strategy = parse_strategy(detail::require_string(obj, "strategy", path, line));
    t.seed = detail::require_field(obj, "seed", path, line).get<std::uint64_t>();
    if (auto it = obj.find("flags"); it != obj.end() && it->is_array()) {
      t.flags = it->get<std::vector<std::string>>();
    }
    triples.push_back(std::move(t));
  });
  return triples;
}

InBatchSummary export_inbatch_manifest(std::span<const std::string> query_ids,
                                       int batch_size, std::uint64_t seed,
                                       const std::string& path) {
  if (batch_size < 2) throw InputError("batch_size must be >= 2");

  std::vector<std::string> shuffled(query_ids.begin(), query_ids.end());
  Rng rng(derive_seed(seed, "inbatch"));
  rng.shuffle(shuffled);

  InBatchSummary summary;
  std::ofstream out = detail::open_out(path);
  for (std::size_t start = 0; start < shuffled.size(); start += batch_size) {
    const std::size_t end = std::min(shuffled.size(), start + batch_size);
    const std::size_t size = end - start;
    json obj;
    obj["batch_index"] = summary.batches;
    obj["query_ids"] = std::vector<std::string>(shuffled.begin() + start,
                                                shuffled.begin() + end);
    obj["in_batch_negatives"] = size - 1;
    json flags = json::array();
    if (size == 1) {
      flags.push_back("DEGENERATE");
      ++summary.degenerate;
    }
    obj["flags"] = std::move(flags);
    out << obj.dump() << "\n";
    ++summary.batches;
  }
  if (!out) throw InputError("failed while writing " + path);
  return summary;
}

}  // namespace sciret
