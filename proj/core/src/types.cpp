#include "sciret/types.hpp"

#include <algorithm>

namespace sciret {

namespace {

std::string upper_copy(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

}  // namespace

Language parse_language(std::string_view text) {
  const std::string up = upper_copy(text);
  if (up == "EN") return Language::EN;
  if (up == "DE") return Language::DE;
  if (up == "FR") return Language::FR;
  return Language::OTHER;
}

bool is_known_language(std::string_view text) {
  const std::string up = upper_copy(text);
  return up == "EN" || up == "DE" || up == "FR" || up == "OTHER";
}

std::string_view to_string(Language lang) {
  switch (lang) {
    case Language::EN: return "EN";
    case Language::DE: return "DE";
    case Language::FR: return "FR";
    case Language::OTHER: return "OTHER";
  }
  return "OTHER";
}

Stage parse_stage(std::string_view text) {
  const std::string up = upper_copy(text);
  if (up == "RETRIEVER") return Stage::RETRIEVER;
  if (up == "RERANKER") return Stage::RERANKER;
  if (up == "FINAL") return Stage::FINAL;
  throw InputError("unknown stage: " + std::string(text));
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::RETRIEVER: return "RETRIEVER";
    case Stage::RERANKER: return "RERANKER";
    case Stage::FINAL: return "FINAL";
  }
  return "RETRIEVER";
}

const Document* Collection::find(std::string_view doc_id) const {
  auto it = by_id_.find(std::string(doc_id));
  if (it == by_id_.end()) return nullptr;
  return &docs[it->second];
}

void Collection::rebuild_lookup() {
  by_id_.clear();
  by_id_.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto [it, inserted] = by_id_.emplace(docs[i].doc_id, i);
    if (!inserted) {
      throw InputError("duplicate doc_id in collection: " + docs[i].doc_id);
    }
  }
}

void RunConfig::validate() const {
  if (k_min < 2) throw InputError("k_min must be >= 2");
  if (k_max < k_min) throw InputError("k_max must be >= k_min");
  if (pool_size_retrieve < 1) throw InputError("pool_size_retrieve must be >= 1");
  if (pool_size_rerank < 1) throw InputError("pool_size_rerank must be >= 1");
  if (pool_size_rerank > pool_size_retrieve) {
    throw InputError("pool_size_rerank must not exceed pool_size_retrieve");
  }
  if (negatives_per_query < 1) throw InputError("negatives_per_query must be >= 1");
  if (negatives_per_query > pool_size_retrieve) {
    throw InputError("negatives_per_query must not exceed pool_size_retrieve");
  }
  if (exclude_top_m < 0) throw InputError("exclude_top_m must be >= 0");
  if (judge_candidates < 1) throw InputError("judge_candidates must be >= 1");
  if (judge_candidates > pool_size_rerank || judge_candidates > pool_size_retrieve) {
    throw InputError("judge_candidates must not exceed the candidate pool sizes");
  }
  if (truncate_units < 1) throw InputError("truncate_units must be >= 1");
}

const std::string& RankedList::top1() const {
  if (entries.empty()) throw InputError("ranked list for query " + query_id + " is empty");
  return entries.front().doc_id;
}

bool ranked_before(const RankedEntry& a, const RankedEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.doc_id < b.doc_id;
}

void sort_ranked(std::vector<RankedEntry>& entries) {
  std::sort(entries.begin(), entries.end(), ranked_before);
}

}  // namespace sciret
