#pragma once

#include <span>
#include <string>
#include <vector>

#include "sciret/embedding.hpp"
#include "sciret/types.hpp"

namespace sciret {

struct PoolEntry {
  std::string doc_id;
  double score = 0.0;
  int rank = 0;  // 1-based, dense
};

// Top-k retrieval result for one query, ordered by (score desc, doc_id asc).
struct CandidatePool {
  std::string query_id;
  std::vector<PoolEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool contains(std::string_view doc_id) const;
  // 1-based rank of doc_id, 0 when absent.
  int rank_of(std::string_view doc_id) const;
};

// Exact flat index: every search scans every row, scores are double-precision
// dot products. On unit-norm rows that ordering is exactly cosine ordering,
// so retrieval quality is a property of the embeddings alone — nothing
// approximate hides in here.
class FlatIndex {
 public:
  explicit FlatIndex(EmbeddingMatrix docs);  // rejects an empty matrix

  std::size_t size() const { return docs_.rows(); }
  int dim() const { return docs_.dim; }
  const EmbeddingMatrix& doc_embeddings() const { return docs_; }

  // k must be in [1, size()]. Ties resolve by ascending doc_id.
  CandidatePool search_topk(std::span<const float> query, int k,
                            std::string query_id = {}) const;

  // Element i is search_topk on query row i. Runs on `workers` threads
  // (0 = hardware concurrency); results are positioned by index, so the
  // output is identical whatever the worker count.
  std::vector<CandidatePool> batch_search(const EmbeddingMatrix& queries, int k,
                                          unsigned workers = 0) const;

 private:
  EmbeddingMatrix docs_;
};

RankedList to_ranked(const CandidatePool& pool, Stage stage);

// Pool JSONL, one pool per line:
//   {"query_id": "...", "entries": [{"doc_id": "...", "score": s, "rank": r}]}
void save_pools(std::span<const CandidatePool> pools, const std::string& path);
std::vector<CandidatePool> load_pools(const std::string& path);

// Ranked-list JSONL mirrors the pool schema with a "stage" field and no rank
// (position is the rank).
void save_ranked(std::span<const RankedList> lists, const std::string& path);
std::vector<RankedList> load_ranked(const std::string& path);

}  // namespace sciret
