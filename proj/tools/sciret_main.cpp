// sciret: a workbench for multi-stage scientific-source retrieval runs.
// Subcommands cover candidate retrieval over precomputed embeddings,
// cluster-aware hard-negative mining, ranking evaluation, and selective
// LLM adjudication of retriever/reranker disagreements.

#include <cstdint>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"

#include "sciret/clustering.hpp"
#include "sciret/collection_io.hpp"
#include "sciret/embedding.hpp"
#include "sciret/eval.hpp"
#include "sciret/index.hpp"
#include "sciret/judge.hpp"
#include "sciret/judge_client.hpp"
#include "sciret/mining.hpp"
#include "sciret/pipeline.hpp"
#include "sciret/types.hpp"
#include "sciret/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInputError = 2;
constexpr int kExitEndpointFailure = 3;

sciret::EmbeddingFormat detect_format(const std::string& path, const std::string& flag) {
  if (!flag.empty()) return sciret::parse_embedding_format(flag);
  return path.ends_with(".jsonl") ? sciret::EmbeddingFormat::JSONL
                                  : sciret::EmbeddingFormat::RAW;
}

sciret::RunConfig load_config(const std::string& config_path,
                              const std::optional<std::uint64_t>& seed) {
  sciret::RunConfig config;
  if (!config_path.empty()) config = sciret::run_config_from_json_file(config_path);
  if (seed) config.rng_seed = *seed;
  config.validate();
  return config;
}

std::vector<sciret::QueryRecord> load_queries_warned(const std::string& path) {
  std::vector<std::string> warnings;
  auto queries = sciret::load_queries(path, &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
  return queries;
}

sciret::EmbeddingMatrix load_normalized(const std::string& path, const std::string& format,
                                        const std::string& ids_path) {
  return sciret::normalize(
      sciret::load_embeddings(path, detect_format(path, format), ids_path));
}

struct EndpointArgs {
  std::string endpoint_config;
  std::string stub_mode;

  std::unique_ptr<sciret::JudgeBackend> make_backend(sciret::Formulation formulation) const {
    if (!stub_mode.empty()) return sciret::make_stub(stub_mode, formulation);
    if (!endpoint_config.empty()) {
      return std::make_unique<sciret::HttpJudgeBackend>(
          sciret::load_endpoint_config(endpoint_config));
    }
    return std::make_unique<sciret::HttpJudgeBackend>(sciret::endpoint_config_from_env());
  }
};

void add_endpoint_options(CLI::App* cmd, EndpointArgs& args) {
  auto* cfg = cmd->add_option("--endpoint-config", args.endpoint_config,
                              "JSON endpoint config (url, model, api_token, ...)");
  cmd->add_option("--stub", args.stub_mode,
                  "Offline judge stand-in: baseline, retriever-top, or fail")
      ->excludes(cfg);
}

int cmd_retrieve(const std::string& queries_path, const std::string& doc_emb,
                 const std::string& doc_format, const std::string& doc_ids,
                 const std::string& query_emb, const std::string& query_format,
                 const std::string& query_ids_path, const std::string& config_path,
                 std::optional<std::uint64_t> seed, std::optional<int> pool_size_flag,
                 unsigned workers, const std::string& out) {
  const sciret::RunConfig config = load_config(config_path, seed);
  const auto queries = load_queries_warned(queries_path);
  if (queries.empty()) throw sciret::InputError(queries_path + ": no queries");

  sciret::EmbeddingMatrix query_matrix = load_normalized(query_emb, query_format, query_ids_path);
  std::vector<std::string> ids;
  ids.reserve(queries.size());
  for (const auto& q : queries) ids.push_back(q.query_id);
  query_matrix = sciret::align(query_matrix, ids);

  const sciret::FlatIndex index(load_normalized(doc_emb, doc_format, doc_ids));
  int pool_size = pool_size_flag.value_or(config.pool_size_retrieve);
  if (static_cast<std::size_t>(pool_size) > index.size()) {
    pool_size = static_cast<int>(index.size());
    std::cerr << "warning: pool size clipped to collection size " << pool_size << "\n";
  }

  const auto pools = index.batch_search(query_matrix, pool_size, workers);
  sciret::save_pools(pools, out);
  std::cerr << "retrieved " << pools.size() << " pools of size " << pool_size
            << " into " << out << "\n";
  return kExitOk;
}

int cmd_cluster(const std::string& pools_path, const std::string& queries_path,
                const std::string& doc_emb, const std::string& doc_format,
                const std::string& doc_ids, const std::string& config_path,
                std::optional<std::uint64_t> seed, std::optional<int> k_min_flag,
                std::optional<int> k_max_flag, const std::string& out) {
  sciret::RunConfig config = load_config(config_path, seed);
  if (k_min_flag) config.k_min = *k_min_flag;
  if (k_max_flag) config.k_max = *k_max_flag;
  config.validate();

  const auto pools = sciret::load_pools(pools_path);
  const auto queries = load_queries_warned(queries_path);
  std::unordered_map<std::string, const sciret::QueryRecord*> by_id;
  for (const auto& q : queries) by_id.emplace(q.query_id, &q);

  const sciret::EmbeddingMatrix doc_matrix = load_normalized(doc_emb, doc_format, doc_ids);
  std::vector<sciret::ClusteredPool> clustered;
  clustered.reserve(pools.size());
  std::size_t unclusterable = 0;
  for (const auto& pool : pools) {
    const auto it = by_id.find(pool.query_id);
    if (it == by_id.end()) {
      throw sciret::InputError("pool query " + pool.query_id + " not in " + queries_path);
    }
    clustered.push_back(sciret::cluster_pool(pool, doc_matrix, it->second->gold_doc_id,
                                             config.k_min, config.k_max, config.rng_seed));
    if (clustered.back().unclusterable) ++unclusterable;
  }
  sciret::save_clustered(clustered, out);
  std::cerr << "clustered " << clustered.size() << " pools (" << unclusterable
            << " unclusterable) into " << out << "\n";
  return kExitOk;
}

int cmd_mine(const std::string& pools_path, const std::string& queries_path,
             const std::string& strategy_name, const std::string& clusters_path,
             const std::string& config_path, std::optional<std::uint64_t> seed,
             std::optional<int> negatives_flag, std::optional<int> exclude_flag,
             int batch_size, const std::string& out) {
  sciret::RunConfig config = load_config(config_path, seed);
  const sciret::MiningStrategy strategy = sciret::parse_strategy(strategy_name);
  const auto queries = load_queries_warned(queries_path);

  if (strategy == sciret::MiningStrategy::IN_BATCH_EXPORT) {
    std::vector<std::string> ids;
    ids.reserve(queries.size());
    for (const auto& q : queries) ids.push_back(q.query_id);
    const auto summary =
        sciret::export_inbatch_manifest(ids, batch_size, config.rng_seed, out);
    std::cerr << "exported " << summary.batches << " batches (" << summary.degenerate
              << " degenerate) into " << out << "\n";
    return kExitOk;
  }

  const auto pools = sciret::load_pools(pools_path);
  std::unordered_map<std::string, const sciret::QueryRecord*> by_id;
  for (const auto& q : queries) by_id.emplace(q.query_id, &q);

  std::unordered_map<std::string, const sciret::ClusteredPool*> clusters_by_id;
  std::vector<sciret::ClusteredPool> clustered;
  if (!clusters_path.empty()) {
    clustered = sciret::load_clustered(clusters_path);
    for (const auto& c : clustered) clusters_by_id.emplace(c.query_id, &c);
  }

  const int negatives = negatives_flag.value_or(config.negatives_per_query);
  const int exclude_top_m = exclude_flag.value_or(config.exclude_top_m);
  std::vector<sciret::Triple> triples;
  std::size_t skipped = 0;
  for (const auto& pool : pools) {
    const auto it = by_id.find(pool.query_id);
    if (it == by_id.end()) {
      throw sciret::InputError("pool query " + pool.query_id + " not in " + queries_path);
    }
    const auto& gold = it->second->gold_doc_id;
    const sciret::ClusteredPool* cluster = nullptr;
    if (auto cit = clusters_by_id.find(pool.query_id); cit != clusters_by_id.end()) {
      cluster = cit->second;
    }
    try {
      triples.push_back(sciret::mine(pool, gold.value_or(""), strategy, cluster,
                                     negatives, exclude_top_m, config.rng_seed));
    } catch (const sciret::GoldAbsentError& e) {
      ++skipped;
      std::cerr << "warning: skipping query " << pool.query_id << ": " << e.what()
                << "\n";
    }
  }
  sciret::export_triples(triples, out);
  std::cerr << "mined " << triples.size() << " triples (" << skipped
            << " skipped) into " << out << "\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& ranked_path, const std::string& queries_path,
                 const std::string& agreement_with, std::vector<int> recall_cutoffs,
                 int mrr_cutoff, const std::string& out_json, const std::string& out_tsv) {
  const auto queries = load_queries_warned(queries_path);
  const auto lists = sciret::load_ranked(ranked_path);

  std::set<std::string> with_gold;
  for (const auto& q : queries) {
    if (q.gold_doc_id) with_gold.insert(q.query_id);
  }
  std::vector<sciret::RankedList> scoreable;
  for (const auto& list : lists) {
    if (with_gold.count(list.query_id) > 0) scoreable.push_back(list);
  }

  sciret::EvalReport report =
      sciret::aggregate(scoreable, queries, recall_cutoffs, mrr_cutoff);
  if (!agreement_with.empty()) {
    const auto other = sciret::load_ranked(agreement_with);
    report.agreement = sciret::agreement_report(lists, other, queries);
  }
  if (!out_json.empty()) sciret::save_report_json(report, out_json);
  if (!out_tsv.empty()) sciret::save_report_tsv(report, out_tsv);
  if (out_json.empty() && out_tsv.empty()) {
    std::cout << sciret::render_report_json(report);
  }
  return kExitOk;
}

int cmd_judge(const std::string& retriever_path, const std::string& reranker_path,
              const std::string& queries_path, const std::string& collection_path,
              const EndpointArgs& endpoint, const std::string& formulation_name,
              bool use_translated, const std::string& config_path,
              std::optional<std::uint64_t> seed, std::optional<int> candidates_flag,
              std::optional<int> truncate_flag, unsigned max_in_flight,
              const std::string& out, const std::string& transcript) {
  sciret::RunConfig config = load_config(config_path, seed);
  sciret::JudgeRunOptions options;
  options.formulation = sciret::parse_formulation(formulation_name);
  options.judge_candidates = candidates_flag.value_or(config.judge_candidates);
  options.truncate_units = truncate_flag.value_or(config.truncate_units);
  options.use_translated = use_translated;
  options.seed = config.rng_seed;
  options.max_in_flight = max_in_flight;

  const auto retriever = sciret::load_ranked(retriever_path);
  const auto reranker = sciret::load_ranked(reranker_path);
  const auto queries = load_queries_warned(queries_path);
  const auto collection = sciret::load_collection(collection_path);

  const auto backend = endpoint.make_backend(options.formulation);
  const sciret::JudgeRunResult result = sciret::run_judge(
      retriever, reranker, queries, collection, *backend, options, transcript);
  sciret::save_ranked(result.finals, out);

  const auto& stats = result.stats;
  std::cerr << "judged " << stats.queries << " queries: " << stats.disagreements
            << " disagreements, " << stats.endpoint_calls << " endpoint calls, "
            << stats.parse_failures << " parse failures, " << stats.context_failures
            << " context failures, " << stats.transport_failures
            << " transport failures\n";
  if (stats.endpoint_failed) {
    std::cerr << "error: endpoint calls failed after retries; finals fell back to "
                 "the reranked baseline\n";
    return kExitEndpointFailure;
  }
  return kExitOk;
}

int cmd_pipeline(sciret::PipelineInputs inputs, const EndpointArgs& endpoint,
                 const std::string& formulation_name, bool use_translated,
                 unsigned max_in_flight) {
  inputs.judge.formulation = sciret::parse_formulation(formulation_name);
  inputs.judge.use_translated = use_translated;
  inputs.judge.max_in_flight = max_in_flight;
  const auto backend = endpoint.make_backend(inputs.judge.formulation);
  inputs.backend = backend.get();

  const sciret::PipelineResult result = sciret::run_pipeline(inputs);
  std::cerr << "pipeline outputs in " << inputs.out_dir << ":\n";
  for (const std::string& path :
       {result.pools_path, result.reranked_path, result.finals_path,
        result.transcript_path, result.report_json_path, result.report_tsv_path,
        result.manifest_path}) {
    std::cerr << "  " << path << "\n";
  }
  std::cout << sciret::render_report_tsv(result.report);
  if (result.judge_stats.endpoint_failed) {
    std::cerr << "error: endpoint calls failed after retries; finals fell back to "
                 "the reranked baseline\n";
    return kExitEndpointFailure;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-stage scientific-source retrieval workbench"};
  app.set_version_flag("--version", sciret::kVersion);
  app.require_subcommand(1);

  // Shared option storage. Each subcommand binds only what it uses.
  std::string collection_path, queries_path, pools_path, clusters_path, ranked_path;
  std::string doc_emb, doc_format, doc_ids, query_emb, query_format, query_ids;
  std::string config_path, out, out_dir, transcript, scores_path, agreement_with;
  std::string strategy_name, formulation_name = "direct";
  std::optional<std::uint64_t> seed;
  std::optional<int> pool_size_flag, k_min_flag, k_max_flag, negatives_flag,
      exclude_flag, candidates_flag, truncate_flag;
  std::vector<int> recall_cutoffs = {10, 20, 50};
  int mrr_cutoff = 5;
  int batch_size = 16;
  unsigned workers = 0;
  unsigned max_in_flight = 4;
  bool use_translated = false;
  EndpointArgs endpoint;

  const auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Run config JSON file");
    cmd->add_option("--seed", seed, "Run seed (overrides the config file)");
  };
  const auto add_doc_embeddings = [&](CLI::App* cmd) {
    cmd->add_option("--doc-embeddings", doc_emb, "Document embedding file")->required();
    cmd->add_option("--doc-format", doc_format, "jsonl or raw (default: by extension)");
    cmd->add_option("--doc-ids", doc_ids, "Sidecar ids file for raw format");
  };

  auto* retrieve = app.add_subcommand("retrieve", "Build candidate pools by exact top-k search");
  retrieve->add_option("--queries", queries_path, "Query JSONL")->required();
  add_doc_embeddings(retrieve);
  retrieve->add_option("--query-embeddings", query_emb, "Query embedding file")->required();
  retrieve->add_option("--query-format", query_format, "jsonl or raw (default: by extension)");
  retrieve->add_option("--query-ids", query_ids, "Sidecar ids file for raw format");
  retrieve->add_option("--pool-size", pool_size_flag, "Pool size (default from config)");
  retrieve->add_option("--workers", workers, "Search threads (0 = all cores)");
  retrieve->add_option("--out", out, "Output pool JSONL")->required();
  add_config(retrieve);

  auto* cluster = app.add_subcommand("cluster", "Cluster each pool in embedding space");
  cluster->add_option("--pools", pools_path, "Pool JSONL from retrieve")->required();
  cluster->add_option("--queries", queries_path, "Query JSONL (gold labels)")->required();
  add_doc_embeddings(cluster);
  cluster->add_option("--k-min", k_min_flag, "Smallest cluster count to try");
  cluster->add_option("--k-max", k_max_flag, "Largest cluster count to try");
  cluster->add_option("--out", out, "Output clustered-pool JSONL")->required();
  add_config(cluster);

  auto* mine = app.add_subcommand("mine", "Mine hard negatives / export training batches");
  mine->add_option("--pools", pools_path, "Pool JSONL from retrieve");
  mine->add_option("--queries", queries_path, "Query JSONL (gold labels)")->required();
  mine->add_option("--strategy", strategy_name,
                   "in_batch_export, ance, cluster_gold, cluster_nearest, cluster_non_gold")
      ->required();
  mine->add_option("--clusters", clusters_path, "Clustered-pool JSONL (cluster strategies)");
  mine->add_option("--negatives", negatives_flag, "Negatives per query");
  mine->add_option("--exclude-top-m", exclude_flag, "Protected top ranks");
  mine->add_option("--batch-size", batch_size, "Batch size for in_batch_export");
  mine->add_option("--out", out, "Output triple / batch JSONL")->required();
  add_config(mine);

  auto* evaluate = app.add_subcommand("evaluate", "Score ranked lists against gold labels");
  evaluate->add_option("--ranked", ranked_path, "Ranked-list JSONL")->required();
  evaluate->add_option("--queries", queries_path, "Query JSONL (gold labels)")->required();
  evaluate->add_option("--agreement-with", agreement_with,
                       "Second ranked-list JSONL for top-1 agreement");
  evaluate->add_option("--recall-cutoffs", recall_cutoffs, "Recall@K cutoffs");
  evaluate->add_option("--mrr-cutoff", mrr_cutoff, "MRR cutoff");
  evaluate->add_option("--out-json", out, "Report JSON path");
  evaluate->add_option("--out-tsv", out_dir, "Report TSV path");

  auto* judge = app.add_subcommand("judge", "Adjudicate retriever/reranker disagreements");
  judge->add_option("--retriever", ranked_path, "Retriever ranked JSONL")->required();
  judge->add_option("--reranker", scores_path, "Reranker ranked JSONL")->required();
  judge->add_option("--queries", queries_path, "Query JSONL")->required();
  judge->add_option("--collection", collection_path, "Collection JSONL")->required();
  add_endpoint_options(judge, endpoint);
  judge->add_option("--formulation", formulation_name, "direct, pairwise, or listwise");
  judge->add_flag("--use-translated", use_translated, "Prefer translated claim text");
  judge->add_option("--judge-candidates", candidates_flag, "Candidate budget");
  judge->add_option("--truncate-units", truncate_flag, "Abstract truncation length");
  judge->add_option("--max-in-flight", max_in_flight, "Parallel endpoint calls");
  judge->add_option("--out", out, "Output FINAL ranked JSONL")->required();
  judge->add_option("--transcript", transcript, "Transcript JSONL path");
  add_config(judge);

  auto* pipeline = app.add_subcommand("pipeline", "Run retrieve, rerank, judge, evaluate");
  pipeline->add_option("--collection", collection_path, "Collection JSONL")->required();
  pipeline->add_option("--queries", queries_path, "Query JSONL")->required();
  add_doc_embeddings(pipeline);
  pipeline->add_option("--query-embeddings", query_emb, "Query embedding file")->required();
  pipeline->add_option("--query-format", query_format, "jsonl or raw (default: by extension)");
  pipeline->add_option("--query-ids", query_ids, "Sidecar ids file for raw format");
  pipeline->add_option("--reranker-scores", scores_path, "Reranker scores TSV")->required();
  add_endpoint_options(pipeline, endpoint);
  pipeline->add_option("--formulation", formulation_name, "direct, pairwise, or listwise");
  pipeline->add_flag("--use-translated", use_translated, "Prefer translated claim text");
  pipeline->add_option("--recall-cutoffs", recall_cutoffs, "Recall@K cutoffs");
  pipeline->add_option("--workers", workers, "Search threads (0 = all cores)");
  pipeline->add_option("--max-in-flight", max_in_flight, "Parallel endpoint calls");
  pipeline->add_option("--out-dir", out_dir, "Output directory")->required();
  add_config(pipeline);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(retrieve)) {
      return cmd_retrieve(queries_path, doc_emb, doc_format, doc_ids, query_emb,
                          query_format, query_ids, config_path, seed, pool_size_flag,
                          workers, out);
    }
    if (app.got_subcommand(cluster)) {
      return cmd_cluster(pools_path, queries_path, doc_emb, doc_format, doc_ids,
                         config_path, seed, k_min_flag, k_max_flag, out);
    }
    if (app.got_subcommand(mine)) {
      return cmd_mine(pools_path, queries_path, strategy_name, clusters_path,
                      config_path, seed, negatives_flag, exclude_flag, batch_size, out);
    }
    if (app.got_subcommand(evaluate)) {
      return cmd_evaluate(ranked_path, queries_path, agreement_with, recall_cutoffs,
                          mrr_cutoff, out, out_dir);
    }
    if (app.got_subcommand(judge)) {
      return cmd_judge(ranked_path, scores_path, queries_path, collection_path,
                       endpoint, formulation_name, use_translated, config_path, seed,
                       candidates_flag, truncate_flag, max_in_flight, out, transcript);
    }
    if (app.got_subcommand(pipeline)) {
      sciret::PipelineInputs inputs;
      inputs.collection_path = collection_path;
      inputs.queries_path = queries_path;
      inputs.doc_embeddings_path = doc_emb;
      inputs.doc_format = detect_format(doc_emb, doc_format);
      inputs.doc_ids_path = doc_ids;
      inputs.query_embeddings_path = query_emb;
      inputs.query_format = detect_format(query_emb, query_format);
      inputs.query_ids_path = query_ids;
      inputs.reranker_scores_path = scores_path;
      inputs.out_dir = out_dir;
      inputs.config = load_config(config_path, seed);
      inputs.recall_cutoffs = recall_cutoffs;
      inputs.workers = workers;
      return cmd_pipeline(std::move(inputs), endpoint, formulation_name,
                          use_translated, max_in_flight);
    }
  } catch (const sciret::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const sciret::GoldAbsentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;  // unreachable: a subcommand is required
}
