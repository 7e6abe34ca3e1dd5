#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sciret {

// Malformed or inconsistent input. The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A query whose gold document is required but unavailable for the operation.
class GoldAbsentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Language { EN, DE, FR, OTHER };

// Unknown language tags fold into OTHER so new claim languages never break a
// load; callers that want to warn can check is_known_language first.
Language parse_language(std::string_view text);
bool is_known_language(std::string_view text);
std::string_view to_string(Language lang);

enum class Stage { RETRIEVER, RERANKER, FINAL };
Stage parse_stage(std::string_view text);
std::string_view to_string(Stage stage);

struct Document {
  std::string doc_id;
  std::string title;
  std::string abstract_text;
  std::string venue;                 // optional, may be empty
  std::vector<std::string> authors;  // optional, may be empty
};

struct Collection {
  std::vector<Document> docs;

  std::size_t size() const { return docs.size(); }
  const Document* find(std::string_view doc_id) const;
  bool contains(std::string_view doc_id) const { return find(doc_id) != nullptr; }

  // Call after mutating docs; loaders do this for you.
  void rebuild_lookup();

 private:
  std::unordered_map<std::string, std::size_t> by_id_;
};

struct QueryRecord {
  std::string query_id;
  Language language = Language::OTHER;
  std::string text_original;
  std::optional<std::string> text_translated;
  std::optional<std::string> gold_doc_id;

  // Claim text used downstream: the translation when requested and present,
  // the original otherwise.
  const std::string& claim_text(bool use_translated) const {
    return (use_translated && text_translated) ? *text_translated : text_original;
  }
};

struct RunConfig {
  int k_min = 3;  // cluster-count search range, inclusive on both ends
  int k_max = 6;
  int pool_size_retrieve = 200;
  int pool_size_rerank = 20;
  int negatives_per_query = 10;  // reranker-style mining; retriever-style runs use 1
  int exclude_top_m = 3;
  int judge_candidates = 5;
  int truncate_units = 384;
  std::uint64_t rng_seed = 0;

  void validate() const;  // throws InputError on violated constraints
};

struct RankedEntry {
  std::string doc_id;
  double score = 0.0;
};

struct RankedList {
  std::string query_id;
  Stage stage = Stage::RETRIEVER;
  std::vector<RankedEntry> entries;

  const std::string& top1() const;  // throws InputError when empty
};

// The one ordering rule used by every ranked artifact: score descending,
// ties broken by ascending doc_id. Keeping this strict and global is what
// makes reruns byte-identical.
bool ranked_before(const RankedEntry& a, const RankedEntry& b);
void sort_ranked(std::vector<RankedEntry>& entries);

}  // namespace sciret
