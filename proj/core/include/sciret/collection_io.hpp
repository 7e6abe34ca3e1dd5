#pragma once

#include <string>
#include <vector>

#include "sciret/types.hpp"

namespace sciret {

// Collection JSONL, one document per line:
//   {"doc_id": "...", "title": "...", "abstract": "...",
//    "venue": "...", "authors": ["..."]}
// venue and authors are optional. Duplicate doc_ids are an error.
Collection load_collection(const std::string& path);
void save_collection(const Collection& collection, const std::string& path);

// Query JSONL, one record per line:
//   {"query_id": "...", "language": "EN", "text_original": "...",
//    "text_translated": "...", "gold_doc_id": "..."}
// text_translated and gold_doc_id are optional. Unknown language values map
// to OTHER; a warning per distinct unknown value lands in `warnings` when the
// caller passes one.
std::vector<QueryRecord> load_queries(const std::string& path,
                                      std::vector<std::string>* warnings = nullptr);
void save_queries(const std::vector<QueryRecord>& queries, const std::string& path);

// Every gold_doc_id must resolve against the collection; returns the list of
// offending query_ids (empty means all good).
std::vector<std::string> missing_gold_ids(const std::vector<QueryRecord>& queries,
                                          const Collection& collection);

}  // namespace sciret
