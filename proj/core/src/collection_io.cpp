#include "sciret/collection_io.hpp"

#include <algorithm>
#include <set>

#include "jsonl.hpp"

namespace sciret {

using detail::json;

Collection load_collection(const std::string& path) {
  Collection collection;
  detail::for_each_jsonl(path, [&](std::size_t line, const json& obj) {
    Document doc;
    doc.doc_id = detail::require_string(obj, "doc_id", path, line);
    doc.title = detail::require_string(obj, "title", path, line);
    doc.abstract_text = detail::require_string(obj, "abstract", path, line);
    if (auto it = obj.find("venue"); it != obj.end() && it->is_string()) {
      doc.venue = it->get<std::string>();
    }
    if (auto it = obj.find("authors"); it != obj.end() && it->is_array()) {
      for (const auto& a : *it) {
        if (!a.is_string()) {
          throw InputError(path + ":" + std::to_string(line) +
                           ": authors must be strings");
        }
        doc.authors.push_back(a.get<std::string>());
      }
    }
    collection.docs.push_back(std::move(doc));
  });
  collection.rebuild_lookup();  // also rejects duplicate ids
  return collection;
}

void save_collection(const Collection& collection, const std::string& path) {
  std::ofstream out = detail::open_out(path);
  for (const Document& doc : collection.docs) {
    json obj;
    obj["doc_id"] = doc.doc_id;
    obj["title"] = doc.title;
    obj["abstract"] = doc.abstract_text;
    if (!doc.venue.empty()) obj["venue"] = doc.venue;
    if (!doc.authors.empty()) obj["authors"] = doc.authors;
    out << obj.dump() << "\n";
  }
  if (!out) throw InputError("failed while writing " + path);
}

std::vector<QueryRecord> load_queries(const std::string& path,
                                      std::vector<std::string>* warnings) {
  std::vector<QueryRecord> queries;
  std::set<std::string> seen_ids;
  std::set<std::string> warned_languages;
  detail::for_each_jsonl(path, [&](std::size_t line, const json& obj) {
    QueryRecord q;
    q.query_id = detail::require_string(obj, "query_id", path, line);
    if (!seen_ids.insert(q.query_id).second) {
      throw InputError(path + ":" + std::to_string(line) +
                       ": duplicate query_id " + q.query_id);
    }
    const std::string lang = detail::require_string(obj, "language", path, line);
    q.language = parse_language(lang);
    if (!is_known_language(lang) && warnings != nullptr &&
        warned_languages.insert(lang).second) {
      warnings->push_back("unknown language \"" + lang + "\" mapped to OTHER");
    }
    q.text_original = detail::require_string(obj, "text_original", path, line);
    if (auto it = obj.find("text_translated"); it != obj.end() && it->is_string()) {
      q.text_translated = it->get<std::string>();
    }
    if (auto it = obj.find("gold_doc_id"); it != obj.end() && it->is_string()) {
      q.gold_doc_id = it->get<std::string>();
    }
    queries.push_back(std::move(q));
  });
  return queries;
}

void save_queries(const std::vector<QueryRecord>& queries, const std::string& path) {
  std::ofstream out = detail::open_out(path);
  for (const QueryRecord& q : queries) {
    json obj;
    obj["query_id"] = q.query_id;
    obj["language"] = std::string(to_string(q.language));
    obj["text_original"] = q.text_original;
    if (q.text_translated) obj["text_translated"] = *q.text_translated;
    if (q.gold_doc_id) obj["gold_doc_id"] = *q.gold_doc_id;
    out << obj.dump() << "\n";
  }
  if (!out) throw InputError("failed while writing " + path);
}

std::vector<std::string> missing_gold_ids(const std::vector<QueryRecord>& queries,
                                          const Collection& collection) {
  std::vector<std::string> missing;
  for (const QueryRecord& q : queries) {
    if (q.gold_doc_id && !collection.contains(*q.gold_doc_id)) {
      missing.push_back(q.query_id);
    }
  }
  std::sort(missing.begin(), missing.end());
  return missing;
}

}  // namespace sciret
