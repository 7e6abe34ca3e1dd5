#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sciret/collection_io.hpp"
#include "sciret/eval.hpp"
#include "sciret/index.hpp"
#include "sciret/judge_client.hpp"
#include "sciret/types.hpp"

namespace sciret {

// Reranker scores arrive as TSV with the header line
//   query_id<TAB>doc_id<TAB>score
// Builds RERANKER lists over the top pool_size_rerank entries of each pool,
// ordered by the new scores. Every needed (query, doc) pair must be scored;
// the error lists every missing pair.
std::vector<RankedList> ingest_reranker_scores(std::span<const CandidatePool> pools,
                                               const std::string& path,
                                               int pool_size_rerank);

struct JudgeRunOptions {
  Formulation formulation = Formulation::DIRECT;
  int judge_candidates = 5;
  int truncate_units = 384;
  bool use_translated = false;  // judge reads translated claims when available
  std::uint64_t seed = 0;
  unsigned max_in_flight = 4;  // parallel endpoint calls
};

struct JudgeStats {
  std::size_t queries = 0;
  std::size_t disagreements = 0;  // cases actually sent to the judge
  std::size_t endpoint_calls = 0;
  std::size_t parse_failures = 0;
  std::size_t context_failures = 0;
  std::size_t transport_failures = 0;
  bool endpoint_failed = false;  // some call ended FAILED even after retries
};

struct JudgeRunResult {
  std::vector<RankedList> finals;  // one FINAL list per query, input order
  JudgeStats stats;
};

// The selective adjudication pass. Agreeing queries pass the reranked list
// through untouched and cost zero endpoint calls; disagreeing queries are
// assembled, prompted, parsed and resolved. Failures of any kind fall back
// to the reranked baseline, so a dead endpoint degrades the run, never
// corrupts it. A transcript line per adjudicated case lands in
// transcript_path (pass an empty string to skip writing).
JudgeRunResult run_judge(std::span<const RankedList> retriever,
                         std::span<const RankedList> reranker,
                         std::span<const QueryRecord> queries,
                         const Collection& collection, JudgeBackend& backend,
                         const JudgeRunOptions& options,
                         const std::string& transcript_path);

// 16-hex-digit FNV-1a of a file's bytes / a string. Cheap content
// fingerprints for the manifest, not cryptographic.
std::string fnv1a64_file(const std::string& path);
std::string fnv1a64_text(std::string_view text);

std::string run_config_to_json(const RunConfig& config);
// Strict: unknown keys are rejected so config typos fail loudly.
RunConfig run_config_from_json(const std::string& text, const std::string& origin);
RunConfig run_config_from_json_file(const std::string& path);

struct ManifestInput {
  std::string role;
  std::string path;
  std::string digest;
};

struct ManifestStage {
  std::string name;
  std::string status;  // "ok" or "endpoint_failed"
  std::vector<std::string> outputs;
};

struct RunManifest {
  std::string run_id;  // digest of config + input digests; stable across reruns
  std::string tool_version;
  std::string created_utc;  // wall clock; deliberately excluded from run_id
  RunConfig config;
  std::vector<ManifestInput> inputs;
  std::vector<ManifestStage> stages;
};

RunManifest make_manifest(const RunConfig& config, std::vector<ManifestInput> inputs);
void save_manifest(const RunManifest& manifest, const std::string& path);

struct PipelineInputs {
  std::string collection_path;
  std::string queries_path;
  std::string doc_embeddings_path;
  EmbeddingFormat doc_format = EmbeddingFormat::JSONL;
  std::string doc_ids_path;  // RAW sidecar override, optional
  std::string query_embeddings_path;
  EmbeddingFormat query_format = EmbeddingFormat::JSONL;
  std::string query_ids_path;
  std::string reranker_scores_path;
  std::string out_dir;
  RunConfig config;
  JudgeRunOptions judge;  // judge.seed is overridden by config.rng_seed
  JudgeBackend* backend = nullptr;
  std::vector<int> recall_cutoffs = {10, 20, 50};
  unsigned workers = 0;  // retrieval threads; 0 = hardware concurrency
};

struct PipelineResult {
  std::string pools_path;
  std::string reranked_path;
  std::string finals_path;
  std::string transcript_path;
  std::string report_json_path;
  std::string report_tsv_path;
  std::string manifest_path;
  EvalReport report;
  JudgeStats judge_stats;
};

// End-to-end run: retrieve pools, ingest reranker scores, adjudicate
// disagreements, evaluate, and drop pools.jsonl, reranked.jsonl,
// finals.jsonl, judge_transcript.jsonl, report.json, report.tsv and
// manifest.json into out_dir. Every output except the manifest timestamp is
// a pure function of (inputs, config, seed).
PipelineResult run_pipeline(const PipelineInputs& inputs);

}  // namespace sciret
