#include "sciret/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <unordered_map>

#include "jsonl.hpp"

namespace sciret {

using detail::json;

namespace {

// Joint guard for aggregate and agreement_report: the ranked query set must
// exactly match the expected set, and mismatches are listed so a partial run
// can't silently shrink an evaluation.
void check_coverage(const std::set<std::string>& ranked, const std::set<std::string>& expected,
                    const char* what) {
  std::vector<std::string> only_ranked;
  std::vector<std::string> only_expected;
  std::set_difference(ranked.begin(), ranked.end(), expected.begin(), expected.end(),
                      std::back_inserter(only_ranked));
  std::set_difference(expected.begin(), expected.end(), ranked.begin(), ranked.end(),
                      std::back_inserter(only_expected));
  if (only_ranked.empty() && only_expected.empty()) return;
  std::string msg = std::string(what) + ": query coverage mismatch.";
  if (!only_expected.empty()) {
    msg += " missing from ranked lists:";
    for (const auto& q : only_expected) msg += " " + q;
    msg += ".";
  }
  if (!only_ranked.empty()) {
    msg += " unexpected in ranked lists:";
    for (const auto& q : only_ranked) msg += " " + q;
    msg += ".";
  }
  throw InputError(msg);
}

constexpr Language kLanguageOrder[] = {Language::EN, Language::DE, Language::FR,
                                       Language::OTHER};

json block_to_json(const MetricBlock& block, int mrr_cutoff) {
  json recall = json::object();
  for (const auto& [cutoff, value] : block.recall) {
    recall[std::to_string(cutoff)] = value;
  }
  json obj;
  obj["n_queries"] = block.n_queries;
  obj["mrr@" + std::to_string(mrr_cutoff)] = block.mrr;
  obj["recall"] = std::move(recall);
  return obj;
}

std::string format6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

double reciprocal_rank_at(const RankedList& list, std::string_view gold_doc_id,
                          int cutoff) {
  if (cutoff < 1) throw InputError("metric cutoff must be >= 1");
  const std::size_t limit =
      std::min(list.entries.size(), static_cast<std::size_t>(cutoff));
  for (std::size_t i = 0; i < limit; ++i) {
    if (list.entries[i].doc_id == gold_doc_id) {
      return 1.0 / static_cast<double>(i + 1);
    }
  }
  return 0.0;
}

double recall_at(const RankedList& list, std::string_view gold_doc_id, int cutoff) {
  if (cutoff < 1) throw InputError("metric cutoff must be >= 1");
  const std::size_t limit =
      std::min(list.entries.size(), static_cast<std::size_t>(cutoff));
  for (std::size_t i = 0; i < limit; ++i) {
    if (list.entries[i].doc_id == gold_doc_id) return 1.0;
  }
  return 0.0;
}

EvalReport aggregate(std::span<const RankedList> lists,
                     std::span<const QueryRecord> queries,
                     std::span<const int> recall_cutoffs, int mrr_cutoff) {
  if (mrr_cutoff < 1) throw InputError("mrr cutoff must be >= 1");
  std::vector<int> cutoffs(recall_cutoffs.begin(), recall_cutoffs.end());
  std::sort(cutoffs.begin(), cutoffs.end());
  cutoffs.erase(std::unique(cutoffs.begin(), cutoffs.end()), cutoffs.end());
  if (cutoffs.empty()) throw InputError("at least one recall cutoff is required");
  if (cutoffs.front() < 1) throw InputError("metric cutoff must be >= 1");

  std::unordered_map<std::string, const QueryRecord*> by_id;
  std::set<std::string> expected;
  for (const QueryRecord& q : queries) {
    by_id.emplace(q.query_id, &q);
    if (q.gold_doc_id) expected.insert(q.query_id);
  }
  std::set<std::string> ranked_ids;
  for (const RankedList& list : lists) {
    if (!ranked_ids.insert(list.query_id).second) {
      throw InputError("aggregate: duplicate ranked list for query " + list.query_id);
    }
  }
  check_coverage(ranked_ids, expected, "aggregate");

  struct Row {
    std::string query_id;
    double rr = 0.0;
    std::vector<double> recalls;
  };
  std::map<Language, std::vector<Row>> per_language;
  for (const RankedList& list : lists) {
    const QueryRecord& q = *by_id.at(list.query_id);
    Row row;
    row.query_id = list.query_id;
    row.rr = reciprocal_rank_at(list, *q.gold_doc_id, mrr_cutoff);
    row.recalls.reserve(cutoffs.size());
    for (const int c : cutoffs) row.recalls.push_back(recall_at(list, *q.gold_doc_id, c));
    per_language[q.language].push_back(std::move(row));
  }

  EvalReport report;
  report.mrr_cutoff = mrr_cutoff;
  report.recall_cutoffs = cutoffs;
  for (const Language lang : kLanguageOrder) {
    auto it = per_language.find(lang);
    if (it == per_language.end()) continue;
    auto& rows = it->second;
    // Sum in query_id order so the block is invariant to input permutation.
    std::sort(rows.begin(), rows.end(),
              [](const Row& a, const Row& b) { return a.query_id < b.query_id; });
    MetricBlock block;
    block.n_queries = rows.size();
    double rr_sum = 0.0;
    std::vector<double> recall_sums(cutoffs.size(), 0.0);
    for (const Row& row : rows) {
      rr_sum += row.rr;
      for (std::size_t i = 0; i < cutoffs.size(); ++i) recall_sums[i] += row.recalls[i];
    }
    block.mrr = rr_sum / static_cast<double>(rows.size());
    for (std::size_t i = 0; i < cutoffs.size(); ++i) {
      block.recall[cutoffs[i]] = recall_sums[i] / static_cast<double>(rows.size());
    }
    report.per_language.emplace(std::string(to_string(lang)), std::move(block));
  }

  // Macro block: every language weighs the same, whatever its query count.
  const auto langs = static_cast<double>(report.per_language.size());
  report.macro.n_queries = ranked_ids.size();
  double mrr_sum = 0.0;
  std::vector<double> recall_sums(cutoffs.size(), 0.0);
  for (const Language lang : kLanguageOrder) {
    auto it = report.per_language.find(std::string(to_string(lang)));
    if (it == report.per_language.end()) continue;
    mrr_sum += it->second.mrr;
    for (std::size_t i = 0; i < cutoffs.size(); ++i) {
      recall_sums[i] += it->second.recall.at(cutoffs[i]);
    }
  }
  report.macro.mrr = mrr_sum / langs;
  for (std::size_t i = 0; i < cutoffs.size(); ++i) {
    report.macro.recall[cutoffs[i]] = recall_sums[i] / langs;
  }
  return report;
}

AgreementBlock agreement_report(std::span<const RankedList> first,
                                std::span<const RankedList> second,
                                std::span<const QueryRecord> queries) {
  std::unordered_map<std::string, const RankedList*> second_by_id;
  std::set<std::string> first_ids;
  std::set<std::string> second_ids;
  for (const RankedList& list : second) {
    if (!second_by_id.emplace(list.query_id, &list).second) {
      throw InputError("agreement_report: duplicate list for query " + list.query_id);
    }
    second_ids.insert(list.query_id);
  }
  for (const RankedList& list : first) {
    if (!first_ids.insert(list.query_id).second) {
      throw InputError("agreement_report: duplicate list for query " + list.query_id);
    }
  }
  check_coverage(first_ids, second_ids, "agreement_report");

  std::unordered_map<std::string, const QueryRecord*> query_by_id;
  for (const QueryRecord& q : queries) query_by_id.emplace(q.query_id, &q);

  AgreementBlock block;
  block.n_queries = first_ids.size();
  std::size_t graded = 0;
  std::size_t correct = 0;
  for (const RankedList& list : first) {
    const RankedList& other = *second_by_id.at(list.query_id);
    if (list.top1() != other.top1()) continue;
    ++block.agreements;
    auto it = query_by_id.find(list.query_id);
    if (it == query_by_id.end() || !it->second->gold_doc_id) continue;
    ++graded;
    if (list.top1() == *it->second->gold_doc_id) ++correct;
  }
  block.agreement_rate = block.n_queries == 0
                             ? 0.0
                             : static_cast<double>(block.agreements) /
                                   static_cast<double>(block.n_queries);
  if (graded > 0) {
    block.agree_correct_rate = static_cast<double>(correct) / static_cast<double>(graded);
  }
  return block;
}

std::string render_report_json(const EvalReport& report) {
  json obj;
  obj["mrr_cutoff"] = report.mrr_cutoff;
  obj["recall_cutoffs"] = report.recall_cutoffs;
  json per_language = json::object();
  for (const auto& [lang, block] : report.per_language) {
    per_language[lang] = block_to_json(block, report.mrr_cutoff);
  }
  obj["per_language"] = std::move(per_language);
  obj["macro"] = block_to_json(report.macro, report.mrr_cutoff);
  if (report.agreement) {
    json agreement;
    agreement["n_queries"] = report.agreement->n_queries;
    agreement["agreements"] = report.agreement->agreements;
    agreement["agreement_rate"] = report.agreement->agreement_rate;
    if (report.agreement->agree_correct_rate) {
      agreement["agree_correct_rate"] = *report.agreement->agree_correct_rate;
    } else {
      agreement["agree_correct_rate"] = nullptr;
    }
    obj["agreement"] = std::move(agreement);
  } else {
    obj["agreement"] = nullptr;
  }
  return obj.dump(2) + "\n";
}

std::string render_report_tsv(const EvalReport& report) {
  std::string out = "group\tn_queries\tmrr@" + std::to_string(report.mrr_cutoff);
  for (const int c : report.recall_cutoffs) out += "\trecall@" + std::to_string(c);
  out += "\n";
  const auto render_row = [&](const std::string& group, const MetricBlock& block) {
    out += group + "\t" + std::to_string(block.n_queries) + "\t" + format6(block.mrr);
    for (const int c : report.recall_cutoffs) out += "\t" + format6(block.recall.at(c));
    out += "\n";
  };
  for (const char* lang : {"EN", "DE", "FR", "OTHER"}) {
    auto it = report.per_language.find(lang);
    if (it != report.per_language.end()) render_row(lang, it->second);
  }
  render_row("macro", report.macro);
  return out;
}

void save_report_json(const EvalReport& report, const std::string& path) {
  std::ofstream out = detail::open_out(path);
  out << render_report_json(report);
  if (!out) throw InputError("failed while writing " + path);
}

void save_report_tsv(const EvalReport& report, const std::string& path) {
  std::ofstream out = detail::open_out(path);
  out << render_report_tsv(report);
  if (!out) throw InputError("failed while writing " + path);
}

}  // namespace sciret
