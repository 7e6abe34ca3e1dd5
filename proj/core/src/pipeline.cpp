#include "sciret/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <set>
#include <unordered_map>

#include "jsonl.hpp"
#include "parallel.hpp"
#include "sciret/version.hpp"

namespace sciret {

using detail::json;

namespace {

struct ScoreKey {
  std::string query_id;
  std::string doc_id;
  bool operator==(const ScoreKey&) const = default;
};

struct ScoreKeyHash {
  std::size_t operator()(const ScoreKey& k) const {
    const std::hash<std::string> h;
    return h(k.query_id) ^ (h(k.doc_id) * 0x9e3779b97f4a7c15ULL);
  }
};

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex16(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::uint64_t fnv1a64_bytes(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Transcript line for one adjudicated case. Latency and attempt counts come
// straight from the backend, so a stubbed backend produces byte-identical
// transcripts run over run.
json transcript_line(const JudgeCase& judge_case, Formulation formulation,
                     const std::string& prompt, const CallResult& call,
                     const JudgeOutcome& outcome) {
  json candidates = json::array();
  for (const JudgeCandidate& c : judge_case.candidates) {
    candidates.push_back({{"letter", c.letter},
                          {"doc_id", c.doc_id},
                          {"retrieval_rank", c.retrieval_rank}});
  }
  json line;
  line["query_id"] = judge_case.query_id;
  line["formulation"] = std::string(to_string(formulation));
  line["baseline_doc_id"] = judge_case.baseline_doc_id;
  line["retriever_top_doc_id"] = judge_case.retriever_top_doc_id;
  line["candidates"] = std::move(candidates);
  line["prompt"] = prompt;
  line["raw_response"] = outcome.raw_response;
  line["parse_status"] = std::string(to_string(outcome.parse_status));
  line["selected_doc_id"] = outcome.selected_doc_id;
  line["fell_back"] = outcome.fell_back;
  if (!outcome.permutation.empty()) line["permutation"] = outcome.permutation;
  line["attempts"] = call.attempts;
  line["latency_ms"] = call.latency_ms;
  if (!call.error.empty()) line["error"] = call.error;
  return line;
}

}  // namespace

std::vector<RankedList> ingest_reranker_scores(std::span<const CandidatePool> pools,
                                               const std::string& path,
                                               int pool_size_rerank) {
  if (pool_size_rerank < 1) throw InputError("pool_size_rerank must be >= 1");

  std::ifstream in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": empty scores file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (split_tabs(line) != std::vector<std::string>{"query_id", "doc_id", "score"}) {
    throw InputError(path + ": first line must be the header query_id\tdoc_id\tscore");
  }

  std::unordered_map<ScoreKey, double, ScoreKeyHash> scores;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_tabs(line);
    if (fields.size() != 3) {
      throw InputError(path + ":" + std::to_string(lineno) + ": expected 3 fields");
    }
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      throw InputError(path + ":" + std::to_string(lineno) + ": bad score \"" +
                       fields[2] + "\"");
    }
    const auto [it, inserted] = scores.emplace(ScoreKey{fields[0], fields[1]}, value);
    if (!inserted) {
      throw InputError(path + ":" + std::to_string(lineno) + ": duplicate score for (" +
                       fields[0] + ", " + fields[1] + ")");
    }
  }

  std::vector<RankedList> lists;
  lists.reserve(pools.size());
  std::vector<std::string> missing;
  for (const CandidatePool& pool : pools) {
    RankedList list;
    list.query_id = pool.query_id;
    list.stage = Stage::RERANKER;
    const std::size_t take =
        std::min(pool.entries.size(), static_cast<std::size_t>(pool_size_rerank));
    for (std::size_t i = 0; i < take; ++i) {
      const auto it = scores.find(ScoreKey{pool.query_id, pool.entries[i].doc_id});
      if (it == scores.end()) {
        missing.push_back("(" + pool.query_id + ", " + pool.entries[i].doc_id + ")");
        continue;
      }
      list.entries.push_back(RankedEntry{pool.entries[i].doc_id, it->second});
    }
    sort_ranked(list.entries);
    lists.push_back(std::move(list));
  }
  if (!missing.empty()) {
    std::string msg = path + ": missing scores for " + std::to_string(missing.size()) +
                      " pair(s):";
    for (const std::string& pair : missing) msg += " " + pair;
    throw InputError(msg);
  }
  return lists;
}

JudgeRunResult run_judge(std::span<const RankedList> retriever,
                         std::span<const RankedList> reranker,
                         std::span<const QueryRecord> queries,
                         const Collection& collection, JudgeBackend& backend,
                         const JudgeRunOptions& options,
                         const std::string& transcript_path) {
  std::unordered_map<std::string, const RankedList*> retriever_by_id;
  for (const RankedList& list : retriever) {
    if (!retriever_by_id.emplace(list.query_id, &list).second) {
      throw InputError("run_judge: duplicate retriever list for query " + list.query_id);
    }
  }
  std::unordered_map<std::string, const QueryRecord*> query_by_id;
  for (const QueryRecord& q : queries) query_by_id.emplace(q.query_id, &q);

  struct Slot {
    RankedList final_list;
    bool adjudicated = false;
    JudgeCase judge_case;
    std::string prompt;
    CallResult call;
    JudgeOutcome outcome;
  };
  std::vector<Slot> slots(reranker.size());

  // Assembly happens up front and serially; only the endpoint call and the
  // response handling run in parallel.
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < reranker.size(); ++i) {
    const RankedList& reranked = reranker[i];
    const auto rit = retriever_by_id.find(reranked.query_id);
    if (rit == retriever_by_id.end()) {
      throw InputError("run_judge: no retriever list for query " + reranked.query_id);
    }
    const auto qit = query_by_id.find(reranked.query_id);
    if (qit == query_by_id.end()) {
      throw InputError("run_judge: no query record for " + reranked.query_id);
    }
    std::optional<JudgeCase> judge_case = detect_and_assemble(
        *rit->second, reranked, *qit->second, collection, options.judge_candidates,
        options.truncate_units, options.use_translated);
    if (!judge_case) {
      slots[i].final_list = reranked;
      slots[i].final_list.stage = Stage::FINAL;
      continue;
    }
    slots[i].adjudicated = true;
    slots[i].judge_case =
        arrange_candidates(std::move(*judge_case), options.formulation, options.seed);
    slots[i].prompt = build_prompt(slots[i].judge_case, options.formulation);
    pending.push_back(i);
  }

  detail::parallel_for(pending.size(), options.max_in_flight, [&](std::size_t p) {
    Slot& slot = slots[pending[p]];
    slot.call = backend.complete(slot.judge_case, slot.prompt);
    switch (slot.call.status) {
      case CallStatus::OK:
        slot.outcome = options.formulation == Formulation::LISTWISE
                           ? listwise_outcome(slot.call.content, slot.judge_case)
                           : parse_selection(slot.call.content, slot.judge_case);
        break;
      case CallStatus::CONTEXT_FAIL:
        slot.outcome =
            failed_outcome(slot.judge_case, ParseStatus::CONTEXT_FAIL, slot.call.error);
        break;
      case CallStatus::FAILED:
        slot.outcome =
            failed_outcome(slot.judge_case, ParseStatus::PARSE_FAIL, slot.call.error);
        break;
    }
    slot.final_list = resolve(reranker[pending[p]], slot.outcome);
  });

  JudgeRunResult result;
  result.stats.queries = reranker.size();
  std::ofstream transcript;
  if (!transcript_path.empty()) transcript = detail::open_out(transcript_path);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    Slot& slot = slots[i];
    result.finals.push_back(std::move(slot.final_list));
    if (!slot.adjudicated) continue;
    ++result.stats.disagreements;
    result.stats.endpoint_calls += 1;
    switch (slot.call.status) {
      case CallStatus::OK:
        if (slot.outcome.parse_status == ParseStatus::PARSE_FAIL) {
          ++result.stats.parse_failures;
        }
        break;
      case CallStatus::CONTEXT_FAIL:
        ++result.stats.context_failures;
        break;
      case CallStatus::FAILED:
        ++result.stats.transport_failures;
        result.stats.endpoint_failed = true;
        break;
    }
    if (!transcript_path.empty()) {
      transcript << transcript_line(slot.judge_case, options.formulation, slot.prompt,
                                    slot.call, slot.outcome)
                        .dump()
                 << "\n";
    }
  }
  if (!transcript_path.empty() && !transcript) {
    throw InputError("failed while writing " + transcript_path);
  }
  return result;
}

std::string fnv1a64_text(std::string_view text) { return hex16(fnv1a64_bytes(text)); }

std::string fnv1a64_file(const std::string& path) {
  std::ifstream in = detail::open_in(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    h = fnv1a64_bytes(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
    if (!in) break;
  }
  return hex16(h);
}

std::string run_config_to_json(const RunConfig& config) {
  json obj;
  obj["k_min"] = config.k_min;
  obj["k_max"] = config.k_max;
  obj["pool_size_retrieve"] = config.pool_size_retrieve;
  obj["pool_size_rerank"] = config.pool_size_rerank;
  obj["negatives_per_query"] = config.negatives_per_query;
  obj["exclude_top_m"] = config.exclude_top_m;
  obj["judge_candidates"] = config.judge_candidates;
  obj["truncate_units"] = config.truncate_units;
  obj["rng_seed"] = config.rng_seed;
  return obj.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text, const std::string& origin) {
  const json obj = json::parse(text, nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) {
    throw InputError(origin + ": invalid config JSON");
  }
  RunConfig config;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const std::string& key = it.key();
    if (key == "k_min") config.k_min = it.value().get<int>();
    else if (key == "k_max") config.k_max = it.value().get<int>();
    else if (key == "pool_size_retrieve") config.pool_size_retrieve = it.value().get<int>();
    else if (key == "pool_size_rerank") config.pool_size_rerank = it.value().get<int>();
    else if (key == "negatives_per_query") config.negatives_per_query = it.value().get<int>();
    else if (key == "exclude_top_m") config.exclude_top_m = it.value().get<int>();
    else if (key == "judge_candidates") config.judge_candidates = it.value().get<int>();
    else if (key == "truncate_units") config.truncate_units = it.value().get<int>();
    else if (key == "rng_seed") config.rng_seed = it.value().get<std::uint64_t>();
    else throw InputError(origin + ": unknown config key \"" + key + "\"");
  }
  config.validate();
  return config;
}

RunConfig run_config_from_json_file(const std::string& path) {
  std::ifstream in = detail::open_in(path);
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  return run_config_from_json(text, path);
}

RunManifest make_manifest(const RunConfig& config, std::vector<ManifestInput> inputs) {
  RunManifest manifest;
  manifest.tool_version = kVersion;
  manifest.created_utc = utc_now();
  manifest.config = config;
  manifest.inputs = std::move(inputs);
  std::string seed_text = run_config_to_json(config);
  for (const ManifestInput& input : manifest.inputs) {
    seed_text += input.role + "=" + input.digest + "\n";
  }
  manifest.run_id = fnv1a64_text(seed_text);
  return manifest;
}

void save_manifest(const RunManifest& manifest, const std::string& path) {
  json obj;
  obj["run_id"] = manifest.run_id;
  obj["tool_version"] = manifest.tool_version;
  obj["created_utc"] = manifest.created_utc;
  obj["config"] = json::parse(run_config_to_json(manifest.config));
  json inputs = json::array();
  for (const ManifestInput& input : manifest.inputs) {
    inputs.push_back({{"role", input.role}, {"path", input.path}, {"digest", input.digest}});
  }
  obj["inputs"] = std::move(inputs);
  json stages = json::array();
  for (const ManifestStage& stage : manifest.stages) {
    stages.push_back(
        {{"name", stage.name}, {"status", stage.status}, {"outputs", stage.outputs}});
  }
  obj["stages"] = std::move(stages);
  std::ofstream out = detail::open_out(path);
  out << obj.dump(2) << "\n";
  if (!out) throw InputError("failed while writing " + path);
}

PipelineResult run_pipeline(const PipelineInputs& inputs) {
  if (inputs.backend == nullptr) throw InputError("pipeline needs a judge backend");
  inputs.config.validate();
  namespace fs = std::filesystem;
  fs::create_directories(inputs.out_dir);

  const Collection collection = load_collection(inputs.collection_path);
  std::vector<std::string> warnings;
  const std::vector<QueryRecord> queries = load_queries(inputs.queries_path, &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
  if (queries.empty()) throw InputError(inputs.queries_path + ": no queries");

  const std::vector<std::string> bad_golds = missing_gold_ids(queries, collection);
  if (!bad_golds.empty()) {
    std::string msg = "gold documents missing from the collection for:";
    for (const std::string& q : bad_golds) msg += " " + q;
    throw InputError(msg);
  }

  EmbeddingMatrix doc_matrix = normalize(
      load_embeddings(inputs.doc_embeddings_path, inputs.doc_format, inputs.doc_ids_path));
  EmbeddingMatrix query_matrix = normalize(load_embeddings(
      inputs.query_embeddings_path, inputs.query_format, inputs.query_ids_path));

  std::vector<std::string> query_ids;
  query_ids.reserve(queries.size());
  for (const QueryRecord& q : queries) query_ids.push_back(q.query_id);
  query_matrix = align(query_matrix, query_ids);

  const FlatIndex index(std::move(doc_matrix));
  int pool_size = inputs.config.pool_size_retrieve;
  if (static_cast<std::size_t>(pool_size) > index.size()) {
    pool_size = static_cast<int>(index.size());
    std::cerr << "warning: pool_size_retrieve clipped to collection size "
              << pool_size << "\n";
  }

  PipelineResult result;
  const auto join = [&](const char* name) {
    return (fs::path(inputs.out_dir) / name).string();
  };
  result.pools_path = join("pools.jsonl");
  result.reranked_path = join("reranked.jsonl");
  result.finals_path = join("finals.jsonl");
  result.transcript_path = join("judge_transcript.jsonl");
  result.report_json_path = join("report.json");
  result.report_tsv_path = join("report.tsv");
  result.manifest_path = join("manifest.json");

  const std::vector<CandidatePool> pools =
      index.batch_search(query_matrix, pool_size, inputs.workers);
  save_pools(pools, result.pools_path);

  const std::vector<RankedList> reranked = ingest_reranker_scores(
      pools, inputs.reranker_scores_path, inputs.config.pool_size_rerank);
  save_ranked(reranked, result.reranked_path);

  std::vector<RankedList> retriever_lists;
  retriever_lists.reserve(pools.size());
  for (const CandidatePool& pool : pools) {
    retriever_lists.push_back(to_ranked(pool, Stage::RETRIEVER));
  }

  JudgeRunOptions judge_options = inputs.judge;
  judge_options.judge_candidates = inputs.config.judge_candidates;
  judge_options.truncate_units = inputs.config.truncate_units;
  judge_options.seed = inputs.config.rng_seed;
  JudgeRunResult judged =
      run_judge(retriever_lists, reranked, queries, collection, *inputs.backend,
                judge_options, result.transcript_path);
  save_ranked(judged.finals, result.finals_path);
  result.judge_stats = judged.stats;

  // Only queries with gold labels are scoreable; agreement covers everything.
  std::set<std::string> with_gold;
  for (const QueryRecord& q : queries) {
    if (q.gold_doc_id) with_gold.insert(q.query_id);
  }
  std::vector<RankedList> scoreable;
  for (const RankedList& list : judged.finals) {
    if (with_gold.count(list.query_id) > 0) scoreable.push_back(list);
  }
  result.report = aggregate(scoreable, queries, inputs.recall_cutoffs);
  result.report.agreement = agreement_report(retriever_lists, reranked, queries);
  save_report_json(result.report, result.report_json_path);
  save_report_tsv(result.report, result.report_tsv_path);

  std::vector<ManifestInput> manifest_inputs = {
      {"collection", inputs.collection_path, fnv1a64_file(inputs.collection_path)},
      {"queries", inputs.queries_path, fnv1a64_file(inputs.queries_path)},
      {"doc_embeddings", inputs.doc_embeddings_path,
       fnv1a64_file(inputs.doc_embeddings_path)},
      {"query_embeddings", inputs.query_embeddings_path,
       fnv1a64_file(inputs.query_embeddings_path)},
      {"reranker_scores", inputs.reranker_scores_path,
       fnv1a64_file(inputs.reranker_scores_path)},
  };
  RunManifest manifest = make_manifest(inputs.config, std::move(manifest_inputs));
  manifest.stages.push_back({"retrieve", "ok", {"pools.jsonl"}});
  manifest.stages.push_back({"rerank", "ok", {"reranked.jsonl"}});
  manifest.stages.push_back({"judge",
                             judged.stats.endpoint_failed ? "endpoint_failed" : "ok",
                             {"finals.jsonl", "judge_transcript.jsonl"}});
  manifest.stages.push_back({"evaluate", "ok", {"report.json", "report.tsv"}});
  save_manifest(manifest, result.manifest_path);
  return result;
}

}  // namespace sciret
