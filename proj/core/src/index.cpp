#include "sciret/index.hpp"

#include <algorithm>
#include <utility>

#include "jsonl.hpp"
#include "parallel.hpp"

namespace sciret {

using detail::json;

bool CandidatePool::contains(std::string_view doc_id) const {
  return rank_of(doc_id) != 0;
}

int CandidatePool::rank_of(std::string_view doc_id) const {
  for (const PoolEntry& e : entries) {
    if (e.doc_id == doc_id) return e.rank;
  }
  return 0;
}

FlatIndex::FlatIndex(EmbeddingMatrix docs) : docs_(std::move(docs)) {
  if (docs_.rows() == 0) throw InputError("cannot build an index over zero documents");
  if (docs_.dim <= 0) throw InputError("cannot build an index with dimension 0");
}

CandidatePool FlatIndex::search_topk(std::span<const float> query, int k,
                                     std::string query_id) const {
  if (static_cast<int>(query.size()) != docs_.dim) {
    throw InputError("query dimension " + std::to_string(query.size()) +
                     " does not match index dimension " + std::to_string(docs_.dim));
  }
  if (k < 1 || static_cast<std::size_t>(k) > docs_.rows()) {
    throw InputError("k=" + std::to_string(k) + " out of range for " +
                     std::to_string(docs_.rows()) + " documents");
  }

  // Selection rule, used both for the heap and the final sort: better means
  // (score desc, doc_id asc). The heap keeps the worst kept entry on top.
  const auto better = [this](const std::pair<double, std::size_t>& a,
                             const std::pair<double, std::size_t>& b) {
    if (a.first != b.first) return a.first > b.first;
    return docs_.ids[a.second] < docs_.ids[b.second];
  };
  const auto heap_cmp = [&better](const std::pair<double, std::size_t>& a,
                                  const std::pair<double, std::size_t>& b) {
    return better(a, b);  // min-heap on "better": top is the weakest kept
  };

  std::vector<std::pair<double, std::size_t>> heap;
  heap.reserve(static_cast<std::size_t>(k) + 1);
  for (std::size_t i = 0; i < docs_.rows(); ++i) {
    const auto row = docs_.row(i);
    double score = 0.0;
    for (int d = 0; d < docs_.dim; ++d) {
      score += static_cast<double>(row[d]) * static_cast<double>(query[d]);
    }
    const std::pair<double, std::size_t> cand{score, i};
    if (heap.size() < static_cast<std::size_t>(k)) {
      heap.push_back(cand);
      std::push_heap(heap.begin(), heap.end(), heap_cmp);
    } else if (better(cand, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), heap_cmp);
      heap.back() = cand;
      std::push_heap(heap.begin(), heap.end(), heap_cmp);
    }
  }
  std::sort(heap.begin(), heap.end(), better);

  CandidatePool pool;
  pool.query_id = std::move(query_id);
  pool.entries.reserve(heap.size());
  int rank = 0;
  for (const auto& [score, idx] : heap) {
    pool.entries.push_back(PoolEntry{docs_.ids[idx], score, ++rank});
  }
  return pool;
}

std::vector<CandidatePool> FlatIndex::batch_search(const EmbeddingMatrix& queries,
                                                   int k, unsigned workers) const {
  if (queries.dim != docs_.dim) {
    throw InputError("query matrix dimension " + std::to_string(queries.dim) +
                     " does not match index dimension " + std::to_string(docs_.dim));
  }
  if (k < 1 || static_cast<std::size_t>(k) > docs_.rows()) {
    throw InputError("k=" + std::to_string(k) + " out of range for " +
                     std::to_string(docs_.rows()) + " documents");
  }
  std::vector<CandidatePool> pools(queries.rows());
  detail::parallel_for(queries.rows(), workers, [&](std::size_t i) {
    try {
      pools[i] = search_topk(queries.row(i), k, queries.ids[i]);
    } catch (const std::exception& e) {
      throw InputError("query " + queries.ids[i] + ": " + e.what());
    }
  });
  return pools;
}

RankedList to_ranked(const CandidatePool& pool, Stage stage) {
  RankedList list;
  list.query_id = pool.query_id;
  list.stage = stage;
  list.entries.reserve(pool.entries.size());
  for (const PoolEntry& e : pool.entries) {
    list.entries.push_back(RankedEntry{e.doc_id, e.score});
  }
  return list;
}

void save_pools(std::span<const CandidatePool> pools, const std::string& path) {
  std::ofstream out = detail::open_out(path);
  for (const CandidatePool& pool : pools) {
    json entries = json::array();
    for (const PoolEntry& e : pool.entries) {
      entries.push_back({{"doc_id", e.doc_id}, {"score", e.score}, {"rank", e.rank}});
    }
    json obj;
    obj["query_id"] = pool.query_id;
    obj["entries"] = std::move(entries);
    out << obj.dump() << "\n";
  }
  if (!out) throw InputError("failed while writing " + path);
}

std::vector<CandidatePool> load_pools(const std::string& path) {
  std::vector<CandidatePool> pools;
  detail::for_each_jsonl(path, [&](std::size_t line, const json& obj) {
    CandidatePool pool;
    pool.query_id = detail::require_string(obj, "query_id", path, line);
    const json& entries = detail::require_field(obj, "entries", path, line);
    if (!entries.is_array()) {
      throw InputError(path + ":" + std::to_string(line) + ": entries must be an array");
    }
    int expected_rank = 0;
    for (const json& e : entries) {
      PoolEntry entry;
      entry.doc_id = detail::require_string(e, "doc_id", path, line);
      entry.score = detail::require_field(e, "score", path, line).get<double>();
      entry.rank = detail::require_field(e, "rank", path, line).get<int>();
      if (entry.rank != ++expected_rank) {
        throw InputError(path + ":" + std::to_string(line) +
                         ": ranks must be dense and 1-based");
      }
      pool.entries.push_back(std::move(entry));
    }
    pools.push_back(std::move(pool));
  });
  return pools;
}

void save_ranked(std::span<const RankedList> lists, const std::string& path) {
  std::ofstream out = detail::open_out(path);
  for (const RankedList& list : lists) {
    json entries = json::array();
    for (const RankedEntry& e : list.entries) {
      entries.push_back({{"doc_id", e.doc_id}, {"score", e.score}});
    }
    json obj;
    obj["query_id"] = list.query_id;
    obj["stage"] = std::string(to_string(list.stage));
    obj["entries"] = std::move(entries);
    out << obj.dump() << "\n";
  }
  if (!out) throw InputError("failed while writing " + path);
}

std::vector<RankedList> load_ranked(const std::string& path) {
  std::vector<RankedList> lists;
  detail::for_each_jsonl(path, [&](std::size_t line, const json& obj) {
    RankedList list;
    list.query_id = detail::require_string(obj, "query_id", path, line);
    list.stage = parse_stage(detail::require_string(obj, "stage", path, line));
    const json& entries = detail::require_field(obj, "entries", path, line);
    if (!entries.is_array()) {
      throw InputError(path + ":" + std::to_string(line) + ": entries must be an array");
    }
    for (const json& e : entries) {
      RankedEntry entry;
      entry.doc_id = detail::require_string(e, "doc_id", path, line);
      entry.score = detail::require_field(e, "score", path, line).get<double>();
      list.entries.push_back(std::move(entry));
    }
    lists.push_back(std::move(list));
  });
  return lists;
}

}  // namespace sciret
