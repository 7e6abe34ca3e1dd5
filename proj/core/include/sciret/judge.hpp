#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sciret/types.hpp"

namespace sciret {

enum class Formulation { DIRECT, PAIRWISE, LISTWISE };
Formulation parse_formulation(std::string_view text);
std::string_view to_string(Formulation formulation);

// Candidate letters: A..Z, then AA, AB, ... (bijective base 26), so budgets
// beyond 26 stay addressable.
std::string letter_for(std::size_t index);

// Collapses whitespace runs to single spaces and keeps at most `max_units`
// whitespace-delimited units, appending " […]" only when something was cut.
std::string truncate_abstract(std::string_view text, int max_units);

struct JudgeCandidate {
  std::string letter;          // assigned by position
  std::string doc_id;
  std::string title;
  std::string abstract_text;   // already truncated
  int retrieval_rank = 0;      // 1-based rank in the retriever list, 0 if absent
};

// One adjudication case: a query where retriever and reranker disagree on
// top-1. Candidates are ordered; the baseline (reranker top-1) is always
// candidates[0].
struct JudgeCase {
  std::string query_id;
  std::string claim_text;
  std::string baseline_doc_id;
  std::string retriever_top_doc_id;
  std::vector<JudgeCandidate> candidates;
};

// Returns a case when the two lists disagree on top-1, nothing otherwise.
// Candidates are the top reranked docs up to `judge_candidates`; the
// retriever's top-1 joins them (appended when there is room, replacing the
// weakest candidate when there is not) unless it is already present.
// Abstracts are truncated to `truncate_units`.
std::optional<JudgeCase> detect_and_assemble(const RankedList& retriever,
                                             const RankedList& reranker,
                                             const QueryRecord& query,
                                             const Collection& collection,
                                             int judge_candidates, int truncate_units,
                                             bool use_translated);

// PAIRWISE presents the baseline first and the remaining candidates in a
// seeded random order (derived per query, so processing order is
// irrelevant); letters are reassigned after the shuffle. DIRECT and LISTWISE
// keep the assembled order. Idempotent for those two.
JudgeCase arrange_candidates(JudgeCase judge_case, Formulation formulation,
                             std::uint64_t seed);

// Renders the full prompt for the case. Byte-stable: same case, same bytes.
std::string build_prompt(const JudgeCase& judge_case, Formulation formulation);

enum class ParseStatus { OK, PARSE_FAIL, CONTEXT_FAIL };
std::string_view to_string(ParseStatus status);

struct JudgeOutcome {
  std::string query_id;
  std::string selected_doc_id;   // baseline whenever parsing failed
  ParseStatus parse_status = ParseStatus::OK;
  bool fell_back = false;        // true iff the baseline won by fallback
  std::vector<int> permutation;  // LISTWISE only: 1-based, complete
  std::string raw_response;
};

// DIRECT / PAIRWISE responses: finds the first JSON object anywhere in the
// response that carries a string "selected_id" and matches it against the
// candidate letters. Anything else — no JSON, wrong letter, not a string —
// falls back to the baseline with PARSE_FAIL.
JudgeOutcome parse_selection(const std::string& raw, const JudgeCase& judge_case);

struct Permutation {
  std::vector<int> order;  // 1-based candidate indices, complete
  bool valid = false;      // false when no usable index was recovered
};

// LISTWISE responses: pulls bracketed integers like [3] in order of
// appearance, drops duplicates (first occurrence wins) and out-of-range
// values, then appends the missing indices in ascending order. A response
// yielding no usable index is invalid, which callers treat as PARSE_FAIL
// (the identity permutation, baseline first).
Permutation parse_permutation(const std::string& raw, int n_candidates);

JudgeOutcome listwise_outcome(const std::string& raw, const JudgeCase& judge_case);

// Outcome for a case whose endpoint call failed permanently. CONTEXT_FAIL
// when the endpoint rejected the prompt for length, PARSE_FAIL otherwise.
JudgeOutcome failed_outcome(const JudgeCase& judge_case, ParseStatus status,
                            const std::string& raw);

// Applies an outcome to the reranked list: the selected doc moves to the
// front (scored just above the previous top so descending order survives)
// and everything else keeps its order. Selecting the baseline changes
// nothing. The result is the FINAL-stage list.
RankedList resolve(const RankedList& reranker, const JudgeOutcome& outcome);

}  // namespace sciret
