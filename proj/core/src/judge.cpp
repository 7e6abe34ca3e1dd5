#include "sciret/judge.hpp"

#include <algorithm>
#include <cctype>

#include "json.hpp"
#include "sciret/rng.hpp"

namespace sciret {

namespace {

using json = nlohmann::json;

// Bijective base 26, candidate index 0-based: A..Z, AA, AB, ...
constexpr int kAlphabet = 26;

int rank_in(const RankedList& list, std::string_view doc_id) {
  for (std::size_t i = 0; i < list.entries.size(); ++i) {
    if (list.entries[i].doc_id == doc_id) return static_cast<int>(i + 1);
  }
  return 0;
}

void assign_letters(std::vector<JudgeCandidate>& candidates) {
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    candidates[i].letter = letter_for(i);
  }
}

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return std::string(text.substr(begin, end - begin));
}

// Extracts the balanced JSON object starting at raw[start] (which must be
// '{'), honouring strings and escapes. Returns the end index one past the
// closing brace, or npos when unbalanced.
std::size_t balanced_object_end(const std::string& raw, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < raw.size(); ++i) {
    const char c = raw[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      --depth;
      if (depth == 0) return i + 1;
    }
  }
  return std::string::npos;
}

// First parseable JSON object in the response that carries a string
// "selected_id". Nested objects are reachable because every '{' position is
// tried in order.
std::optional<std::string> extract_selected_id(const std::string& raw) {
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '{') continue;
    const std::size_t end = balanced_object_end(raw, i);
    if (end == std::string::npos) continue;
    const json parsed = json::parse(raw.substr(i, end - i), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) continue;
    const auto it = parsed.find("selected_id");
    if (it != parsed.end() && it->is_string()) return it->get<std::string>();
  }
  return std::nullopt;
}

JudgeOutcome baseline_outcome(const JudgeCase& judge_case, ParseStatus status,
                              const std::string& raw) {
  JudgeOutcome outcome;
  outcome.query_id = judge_case.query_id;
  outcome.selected_doc_id = judge_case.baseline_doc_id;
  outcome.parse_status = status;
  outcome.fell_back = true;
  outcome.raw_response = raw;
  return outcome;
}

}  // namespace

Formulation parse_formulation(std::string_view text) {
  std::string up(text);
  std::transform(up.begin(), up.end(), up.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (up == "DIRECT") return Formulation::DIRECT;
  if (up == "PAIRWISE") return Formulation::PAIRWISE;
  if (up == "LISTWISE") return Formulation::LISTWISE;
  throw InputError("unknown judge formulation: " + std::string(text));
}

std::string_view to_string(Formulation formulation) {
  switch (formulation) {
    case Formulation::DIRECT: return "DIRECT";
    case Formulation::PAIRWISE: return "PAIRWISE";
    case Formulation::LISTWISE: return "LISTWISE";
  }
  return "DIRECT";
}

std::string_view to_string(ParseStatus status) {
  switch (status) {
    case ParseStatus::OK: return "OK";
    case ParseStatus::PARSE_FAIL: return "PARSE_FAIL";
    case ParseStatus::CONTEXT_FAIL: return "CONTEXT_FAIL";
  }
  return "OK";
}

std::string letter_for(std::size_t index) {
  std::string out;
  for (std::size_t n = index + 1; n > 0; n = (n - 1) / kAlphabet) {
    out.insert(out.begin(), static_cast<char>('A' + (n - 1) % kAlphabet));
  }
  return out;
}

std::string truncate_abstract(std::string_view text, int max_units) {
  if (max_units < 1) throw InputError("truncate_units must be >= 1");
  std::vector<std::string_view> units;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    units.push_back(text.substr(i, j - i));
    i = j;
  }
  const bool truncated = units.size() > static_cast<std::size_t>(max_units);
  if (truncated) units.resize(static_cast<std::size_t>(max_units));
  std::string out;
  for (std::size_t u = 0; u < units.size(); ++u) {
    if (u > 0) out += ' ';
    out += units[u];
  }
  if (truncated) out += " […]";
  return out;
}

std::optional<JudgeCase> detect_and_assemble(const RankedList& retriever,
                                             const RankedList& reranker,
                                             const QueryRecord& query,
                                             const Collection& collection,
                                             int judge_candidates, int truncate_units,
                                             bool use_translated) {
  if (retriever.query_id != reranker.query_id || retriever.query_id != query.query_id) {
    throw InputError("detect_and_assemble: query ids do not line up (" +
                     retriever.query_id + ", " + reranker.query_id + ", " +
                     query.query_id + ")");
  }
  if (judge_candidates < 1) throw InputError("judge_candidates must be >= 1");
  const std::string& retriever_top = retriever.top1();
  const std::string& baseline = reranker.top1();
  if (retriever_top == baseline) return std::nullopt;

  std::vector<std::string> ids;
  const std::size_t budget = static_cast<std::size_t>(judge_candidates);
  for (const RankedEntry& e : reranker.entries) {
    if (ids.size() == budget) break;
    ids.push_back(e.doc_id);
  }
  if (std::find(ids.begin(), ids.end(), retriever_top) == ids.end()) {
    if (ids.size() < budget) {
      ids.push_back(retriever_top);
    } else if (ids.size() >= 2) {
      ids.back() = retriever_top;  // evict the weakest reranked candidate
    } else {
      ids.push_back(retriever_top);  // never evict the baseline itself
    }
  }

  JudgeCase judge_case;
  judge_case.query_id = query.query_id;
  judge_case.claim_text = query.claim_text(use_translated);
  judge_case.baseline_doc_id = baseline;
  judge_case.retriever_top_doc_id = retriever_top;
  judge_case.candidates.reserve(ids.size());
  for (const std::string& id : ids) {
    const Document* doc = collection.find(id);
    if (doc == nullptr) {
      throw InputError("candidate doc " + id + " for query " + query.query_id +
                       " is not in the collection");
    }
    JudgeCandidate candidate;
    candidate.doc_id = id;
    candidate.title = doc->title;
    candidate.abstract_text = truncate_abstract(doc->abstract_text, truncate_units);
    candidate.retrieval_rank = rank_in(retriever, id);
    judge_case.candidates.push_back(std::move(candidate));
  }
  assign_letters(judge_case.candidates);
  return judge_case;
}

JudgeCase arrange_candidates(JudgeCase judge_case, Formulation formulation,
                             std::uint64_t seed) {
  if (formulation == Formulation::PAIRWISE && judge_case.candidates.size() > 2) {
    std::vector<JudgeCandidate> others(judge_case.candidates.begin() + 1,
                                       judge_case.candidates.end());
    Rng rng(derive_seed(seed, "judge:" + judge_case.query_id));
    rng.shuffle(others);
    judge_case.candidates.resize(1);
    judge_case.candidates.insert(judge_case.candidates.end(),
                                 std::make_move_iterator(others.begin()),
                                 std::make_move_iterator(others.end()));
  }
  assign_letters(judge_case.candidates);
  return judge_case;
}

std::string build_prompt(const JudgeCase& judge_case, Formulation formulation) {
  if (judge_case.candidates.empty()) {
    throw InputError("cannot build a prompt without candidates for query " +
                     judge_case.query_id);
  }
  std::string out;
  switch (formulation) {
    case Formulation::DIRECT: {
      out += "Instruction: Act as a scientific fact-checker. You are given a claim\n";
      out += "and a list of candidate scientific papers.\n";
      out += "Choose the single paper that provides the strongest evidence\n";
      out += "supporting or verifying the claim.\n";
      out += "\n";
      out += "Claim: " + judge_case.claim_text + "\n";
      out += "\n";
      out += "Candidates:\n";
      for (const JudgeCandidate& c : judge_case.candidates) {
        out += "Paper ID " + c.letter + ":\n";
        out += "Title: " + c.title + "\n";
        out += "Abstract: " + c.abstract_text + "\n";
        out += "\n";
      }
      out += "Output instructions:\n";
      out += "Return valid JSON only.\n";
      out += "Use this exact format: {\"selected_id\": \"A\"}\n";
      break;
    }
    case Formulation::PAIRWISE: {
      const std::string& last_letter = judge_case.candidates.back().letter;
      out += "Instruction: Act as a scientific fact-checker.\n";
      out += "Candidate Paper A is the baseline current best guess.\n";
      out += "First decide whether Paper A adequately supports or verifies the claim.\n";
      out += "Then compare Papers B-" + last_letter + " against Paper A.\n";
      out += "If none is clearly better than Paper A, keep A.\n";
      out += "If another paper is clearly better, choose the single best alternative.\n";
      out += "Retrieval rank is only a weak prior.\n";
      out += "\n";
      out += "Claim: " + judge_case.claim_text + "\n";
      out += "\n";
      out += "Candidates (order randomized):\n";
      for (const JudgeCandidate& c : judge_case.candidates) {
        out += "Paper ID " + c.letter +
               " (retrieval rank: " + std::to_string(c.retrieval_rank) + "):\n";
        out += "Title: " + c.title + "\n";
        out += "Abstract: " + c.abstract_text + "\n";
        out += "\n";
      }
      out += "Output instructions:\n";
      out += "Return valid JSON only.\n";
      out += "Use this exact format: {\"selected_id\": \"X\"}\n";
      break;
    }
    case Formulation::LISTWISE: {
      const std::string n = std::to_string(judge_case.candidates.size());
      out += "You are RankGPT, an intelligent assistant that can rank passages\n";
      out += "based on their relevance to a search query.\n";
      out += "I will provide you with " + n + " candidate papers, each identified by a\n";
      out += "number in square brackets.\n";
      out += "Rank the papers based on how well they support or verify the claim.\n";
      out += "\n";
      out += "Claim: " + judge_case.claim_text + "\n";
      out += "\n";
      out += "Candidates:\n";
      for (std::size_t i = 0; i < judge_case.candidates.size(); ++i) {
        const JudgeCandidate& c = judge_case.candidates[i];
        out += "[" + std::to_string(i + 1) + "] Title: " + c.title + "\n";
        out += "Abstract: " + c.abstract_text + "\n";
        out += "\n";
      }
      out += "Rank the " + n + " candidates above based on their relevance to the claim.\n";
      out += "Return only the ranking permutation using the format\n";
      out += "[1] > [2] > ... > [N].\n";
      out += "Do not explain your answer.\n";
      break;
    }
  }
  return out;
}

JudgeOutcome parse_selection(const std::string& raw, const JudgeCase& judge_case) {
  const std::optional<std::string> selected_id = extract_selected_id(raw);
  if (selected_id) {
    const std::string wanted = trim(*selected_id);
    for (const JudgeCandidate& c : judge_case.candidates) {
      if (c.letter == wanted) {
        JudgeOutcome outcome;
        outcome.query_id = judge_case.query_id;
        outcome.selected_doc_id = c.doc_id;
        outcome.parse_status = ParseStatus::OK;
        outcome.fell_back = false;
        outcome.raw_response = raw;
        return outcome;
      }
    }
  }
  return baseline_outcome(judge_case, ParseStatus::PARSE_FAIL, raw);
}

Permutation parse_permutation(const std::string& raw, int n_candidates) {
  if (n_candidates < 1) throw InputError("parse_permutation: need at least 1 candidate");
  Permutation result;
  std::vector<bool> seen(static_cast<std::size_t>(n_candidates) + 1, false);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '[') continue;
    std::size_t j = i + 1;
    while (j < raw.size() && std::isdigit(static_cast<unsigned char>(raw[j]))) ++j;
    if (j >= raw.size() || raw[j] != ']' || j == i + 1) continue;
    const std::size_t digits = j - i - 1;
    if (digits > 9) continue;  // longer than any candidate index can be
    const int value = std::stoi(raw.substr(i + 1, digits));
    if (value < 1 || value > n_candidates) continue;
    if (seen[static_cast<std::size_t>(value)]) continue;  // first occurrence wins
    seen[static_cast<std::size_t>(value)] = true;
    result.order.push_back(value);
  }
  result.valid = !result.order.empty();
  for (int v = 1; v <= n_candidates; ++v) {
    if (!seen[static_cast<std::size_t>(v)]) result.order.push_back(v);
  }
  return result;
}

JudgeOutcome listwise_outcome(const std::string& raw, const JudgeCase& judge_case) {
  const Permutation perm =
      parse_permutation(raw, static_cast<int>(judge_case.candidates.size()));
  if (!perm.valid) {
    JudgeOutcome outcome = baseline_outcome(judge_case, ParseStatus::PARSE_FAIL, raw);
    outcome.permutation = perm.order;  // identity: baseline first
    return outcome;
  }
  JudgeOutcome outcome;
  outcome.query_id = judge_case.query_id;
  outcome.selected_doc_id =
      judge_case.candidates[static_cast<std::size_t>(perm.order.front() - 1)].doc_id;
  outcome.parse_status = ParseStatus::OK;
  outcome.fell_back = false;
  outcome.permutation = perm.order;
  outcome.raw_response = raw;
  return outcome;
}

JudgeOutcome failed_outcome(const JudgeCase& judge_case, ParseStatus status,
                            const std::string& raw) {
  if (status == ParseStatus::OK) {
    throw InputError("failed_outcome: status must be a failure status");
  }
  return baseline_outcome(judge_case, status, raw);
}

RankedList resolve(const RankedList& reranker, const JudgeOutcome& outcome) {
  RankedList final_list = reranker;
  final_list.stage = Stage::FINAL;
  const std::string& top = reranker.top1();
  if (outcome.selected_doc_id == top) return final_list;

  const double promoted_score = reranker.entries.front().score + 1.0;
  auto it = std::find_if(final_list.entries.begin(), final_list.entries.end(),
                         [&](const RankedEntry& e) {
                           return e.doc_id == outcome.selected_doc_id;
                         });
  if (it != final_list.entries.end()) final_list.entries.erase(it);
  final_list.entries.insert(final_list.entries.begin(),
                            RankedEntry{outcome.selected_doc_id, promoted_score});
  return final_list;
}

}  // namespace sciret
