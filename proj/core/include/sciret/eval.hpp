#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sciret/types.hpp"

namespace sciret {

// 1/rank of the gold doc within the top `cutoff` entries, 0 when absent.
double reciprocal_rank_at(const RankedList& list, std::string_view gold_doc_id,
                          int cutoff);

// 1 when the gold doc appears within the top `cutoff` entries, else 0.
double recall_at(const RankedList& list, std::string_view gold_doc_id, int cutoff);

struct MetricBlock {
  std::size_t n_queries = 0;
  double mrr = 0.0;
  std::map<int, double> recall;  // cutoff -> mean recall
};

struct AgreementBlock {
  std::size_t n_queries = 0;
  std::size_t agreements = 0;     // identical top-1 in both lists
  double agreement_rate = 0.0;
  // Fraction of agreeing queries whose shared top-1 is the gold doc. Empty
  // when there are no agreements to grade (never 0/0 pretending to be 0).
  std::optional<double> agree_correct_rate;
};

struct EvalReport {
  int mrr_cutoff = 5;
  std::vector<int> recall_cutoffs;
  // Keyed EN/DE/FR/OTHER; only languages that actually occur appear.
  std::map<std::string, MetricBlock> per_language;
  // Unweighted mean over the per-language blocks, so each language counts
  // equally regardless of query volume. n_queries is the overall total.
  MetricBlock macro;
  std::optional<AgreementBlock> agreement;
};

// Scores one ranked list per query against the gold labels in `queries`.
// The set of ranked query_ids must equal the set of queries that carry a
// gold_doc_id; any difference is reported in full. Per-query values are
// summed in query_id order, which makes the result independent of input
// permutation down to the last bit.
EvalReport aggregate(std::span<const RankedList> lists,
                     std::span<const QueryRecord> queries,
                     std::span<const int> recall_cutoffs, int mrr_cutoff = 5);

// Top-1 agreement between two runs over the same queries (paired by
// query_id; the query sets must match exactly). Correctness of agreeing
// top-1s is graded against gold labels where available.
AgreementBlock agreement_report(std::span<const RankedList> first,
                                std::span<const RankedList> second,
                                std::span<const QueryRecord> queries);

std::string render_report_json(const EvalReport& report);  // pretty, 2-space indent

// One row per language plus the macro row; columns are fixed
// (group, n_queries, mrr@M, recall@K...) and values print with 6 decimals.
std::string render_report_tsv(const EvalReport& report);

void save_report_json(const EvalReport& report, const std::string& path);
void save_report_tsv(const EvalReport& report, const std::string& path);

}  // namespace sciret
