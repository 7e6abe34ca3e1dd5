#include "doctest.h"

#include <fstream>
#include <set>

#include "json.hpp"
#include "sciret/pipeline.hpp"
#include "sciret/version.hpp"
#include "support/tmpdir.hpp"

using namespace sciret;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "cannot read " << path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t stop = text.find('\n', start);
    if (stop == std::string::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, stop - start));
    start = stop + 1;
  }
  return lines;
}

CandidatePool make_pool(const std::string& query_id,
                        const std::vector<std::string>& ids) {
  CandidatePool pool;
  pool.query_id = query_id;
  double score = 1.0;
  for (const auto& id : ids) {
    pool.entries.push_back({id, score, static_cast<int>(pool.entries.size()) + 1});
    score -= 0.01;
  }
  return pool;
}

RankedList make_list(const std::string& query_id,
                     const std::vector<std::string>& ids, Stage stage) {
  RankedList list;
  list.query_id = query_id;
  list.stage = stage;
  double score = 1.0;
  for (const auto& id : ids) {
    list.entries.push_back({id, score});
    score -= 0.05;
  }
  return list;
}

Collection judge_collection() {
  Collection c;
  for (const char* id : {"p001", "p002", "p003", "p004"}) {
    Document d;
    d.doc_id = id;
    d.title = std::string("title ") + id;
    d.abstract_text = std::string("abstract for ") + id;
    c.docs.push_back(std::move(d));
  }
  c.rebuild_lookup();
  return c;
}

QueryRecord simple_query(const std::string& id, const std::string& gold) {
  QueryRecord q;
  q.query_id = id;
  q.language = Language::EN;
  q.text_original = "claim for " + id;
  if (!gold.empty()) q.gold_doc_id = gold;
  return q;
}

// On-disk world for full pipeline runs: six docs on near-orthogonal axes,
// three queries whose nearest doc is their gold.
struct World {
  TempDir dir{"pipeline"};
  std::string collection_path, queries_path, doc_emb_path, query_emb_path,
      scores_path;

  World() {
    collection_path = dir.file("collection.jsonl");
    queries_path = dir.file("queries.jsonl");
    doc_emb_path = dir.file("docs.emb.jsonl");
    query_emb_path = dir.file("queries.emb.jsonl");
    scores_path = dir.file("scores.tsv");

    Collection collection;
    for (const char* id : {"d1", "d2", "d3", "d4", "d5", "d6"}) {
      Document d;
      d.doc_id = id;
      d.title = std::string("title ") + id;
      d.abstract_text = std::string("abstract ") + id;
      collection.docs.push_back(std::move(d));
    }
    collection.rebuild_lookup();
    save_collection(collection, collection_path);

    std::vector<QueryRecord> queries;
    QueryRecord qa = simple_query("qa", "d1");
    QueryRecord qb = simple_query("qb", "d2");
    QueryRecord qc = simple_query("qc", "d3");
    qc.language = Language::DE;
    queries = {qa, qb, qc};
    save_queries(queries, queries_path);

    EmbeddingMatrix docs;
    docs.dim = 4;
    docs.ids = {"d1", "d2", "d3", "d4", "d5", "d6"};
    docs.data = {
        1.0f, 0.0f, 0.0f, 0.0f,  // d1
        0.0f, 1.0f, 0.0f, 0.0f,  // d2
        0.0f, 0.0f, 1.0f, 0.0f,  // d3
        0.9f, 0.1f, 0.0f, 0.0f,  // d4, near d1
        0.1f, 0.9f, 0.0f, 0.0f,  // d5, near d2
        0.0f, 0.0f, 0.9f, 0.1f,  // d6, near d3
    };
    docs.rebuild_lookup();
    save_embeddings_jsonl(docs, doc_emb_path);

    // Stored shuffled on purpose; the pipeline aligns them to query order.
    EmbeddingMatrix qm;
    qm.dim = 4;
    qm.ids = {"qc", "qa", "qb"};
    qm.data = {
        0.02f, 0.05f, 1.0f, 0.0f,  // qc -> d3
        1.0f, 0.05f, 0.02f, 0.0f,  // qa -> d1
        0.05f, 1.0f, 0.02f, 0.0f,  // qb -> d2
    };
    qm.rebuild_lookup();
    save_embeddings_jsonl(qm, query_emb_path);

    // qa agrees with the retriever; qb and qc promote a different doc.
    std::ofstream scores(scores_path);
    scores << "query_id\tdoc_id\tscore\n";
    const auto row = [&](const char* q, const char* d, double s) {
      scores << q << "\t" << d << "\t" << s << "\n";
    };
    row("qa", "d1", 10); row("qa", "d4", 9); row("qa", "d2", 8);
    row("qa", "d5", 7);  row("qa", "d3", 6); row("qa", "d6", 5);
    row("qb", "d5", 10); row("qb", "d2", 9); row("qb", "d1", 8);
    row("qb", "d4", 7);  row("qb", "d3", 6); row("qb", "d6", 5);
    row("qc", "d6", 10); row("qc", "d3", 9); row("qc", "d1", 3);
    row("qc", "d2", 2);  row("qc", "d4", 1.5); row("qc", "d5", 1);
  }

  PipelineInputs inputs(JudgeBackend& backend, const std::string& out_dir) const {
    PipelineInputs in;
    in.collection_path = collection_path;
    in.queries_path = queries_path;
    in.doc_embeddings_path = doc_emb_path;
    in.query_embeddings_path = query_emb_path;
    in.reranker_scores_path = scores_path;
    in.out_dir = out_dir;
    in.config.pool_size_retrieve = 6;
    in.config.pool_size_rerank = 6;
    in.config.negatives_per_query = 2;
    in.config.judge_candidates = 3;
    in.config.rng_seed = 11;
    in.backend = &backend;
    in.recall_cutoffs = {1, 5};
    return in;
  }
};

}  // namespace

TEST_CASE("reranker score ingestion") {
  TempDir dir("scores");
  const std::vector<CandidatePool> pools = {
      make_pool("q1", {"a", "b", "c", "d"}),
      make_pool("q2", {"e", "f"}),
  };

  SUBCASE("rescores the rerank window and sorts by the new scores") {
    const std::string path = dir.file("ok.tsv");
    {
      std::ofstream out(path);
      out << "query_id\tdoc_id\tscore\n";
      out << "q1\ta\t0.1\nq1\tb\t0.9\nq1\tc\t0.5\n";
      out << "q2\te\t-1\nq2\tf\t-0.5\n";
      out << "q9\tzz\t3.0\n";  // extra rows are ignored
    }
    const auto lists = ingest_reranker_scores(pools, path, 3);
    REQUIRE(lists.size() == 2);
    CHECK(lists[0].stage == Stage::RERANKER);
    REQUIRE(lists[0].entries.size() == 3);  // top-3 window of a 4-doc pool
    CHECK(lists[0].entries[0].doc_id == "b");
    CHECK(lists[0].entries[1].doc_id == "c");
    CHECK(lists[0].entries[2].doc_id == "a");
    CHECK(lists[1].entries[0].doc_id == "f");
    CHECK(lists[1].entries[1].doc_id == "e");
  }
  SUBCASE("score ties fall back to doc_id order") {
    const std::string path = dir.file("ties.tsv");
    {
      std::ofstream out(path);
      out << "query_id\tdoc_id\tscore\n";
      out << "q1\tc\t1\nq1\tb\t1\nq1\ta\t1\nq1\td\t1\n";
      out << "q2\te\t1\nq2\tf\t1\n";
    }
    const auto lists = ingest_reranker_scores(pools, path, 10);
    CHECK(lists[0].entries[0].doc_id == "a");
    CHECK(lists[0].entries[3].doc_id == "d");
  }
  SUBCASE("missing pairs are all listed") {
    const std::string path = dir.file("missing.tsv");
    {
      std::ofstream out(path);
      out << "query_id\tdoc_id\tscore\n";
      out << "q1\ta\t0.1\nq2\te\t0.2\n";
    }
    CHECK_THROWS_WITH_AS(ingest_reranker_scores(pools, path, 2),
                         doctest::Contains("(q1, b)"), InputError);
    CHECK_THROWS_WITH_AS(ingest_reranker_scores(pools, path, 2),
                         doctest::Contains("(q2, f)"), InputError);
  }
  SUBCASE("format errors") {
    const std::string bad_header = dir.file("h.tsv");
    { std::ofstream out(bad_header); out << "qid\tdoc\tscore\nq1\ta\t1\n"; }
    CHECK_THROWS_AS(ingest_reranker_scores(pools, bad_header, 2), InputError);

    const std::string bad_score = dir.file("s.tsv");
    {
      std::ofstream out(bad_score);
      out << "query_id\tdoc_id\tscore\nq1\ta\t1.5x\n";
    }
    CHECK_THROWS_WITH_AS(ingest_reranker_scores(pools, bad_score, 2),
                         doctest::Contains(":2"), InputError);

    const std::string dup = dir.file("d.tsv");
    {
      std::ofstream out(dup);
      out << "query_id\tdoc_id\tscore\nq1\ta\t1\nq1\ta\t2\n";
    }
    CHECK_THROWS_AS(ingest_reranker_scores(pools, dup, 2), InputError);

    CHECK_THROWS_AS(ingest_reranker_scores(pools, dir.file("absent.tsv"), 2),
                    InputError);
  }
  SUBCASE("windows CRLF endings are tolerated") {
    const std::string path = dir.file("crlf.tsv");
    {
      std::ofstream out(path, std::ios::binary);
      out << "query_id\tdoc_id\tscore\r\nq1\ta\t1\r\nq1\tb\t2\r\n";
      out << "q2\te\t1\r\nq2\tf\t2\r\n";
    }
    const auto lists = ingest_reranker_scores(pools, path, 2);
    CHECK(lists[0].entries[0].doc_id == "b");
  }
}

TEST_CASE("run_judge routes only disagreements to the backend") {
  const Collection collection = judge_collection();
  const std::vector<QueryRecord> queries = {
      simple_query("q1", "p001"), simple_query("q2", "p002"),
      simple_query("q3", "p003")};
  // q1 agrees; q2 and q3 disagree.
  const std::vector<RankedList> retriever = {
      make_list("q1", {"p001", "p002", "p003"}, Stage::RETRIEVER),
      make_list("q2", {"p002", "p001", "p004"}, Stage::RETRIEVER),
      make_list("q3", {"p003", "p004", "p001"}, Stage::RETRIEVER),
  };
  const std::vector<RankedList> reranker = {
      make_list("q1", {"p001", "p003", "p002"}, Stage::RERANKER),
      make_list("q2", {"p001", "p002", "p004"}, Stage::RERANKER),
      make_list("q3", {"p004", "p001", "p003"}, Stage::RERANKER),
  };
  JudgeRunOptions options;
  options.judge_candidates = 3;
  options.seed = 5;

  SUBCASE("baseline verdicts keep the reranked order and cost two calls") {
    TempDir dir("judge-baseline");
    StubJudgeBackend stub(StubJudgeBackend::Mode::BASELINE, Formulation::DIRECT);
    const JudgeRunResult result = run_judge(retriever, reranker, queries, collection,
                                            stub, options, dir.file("t.jsonl"));
    CHECK(result.stats.queries == 3);
    CHECK(result.stats.disagreements == 2);
    CHECK(result.stats.endpoint_calls == 2);
    CHECK(stub.calls() == 2);
    CHECK(result.stats.parse_failures == 0);
    CHECK_FALSE(result.stats.endpoint_failed);
    REQUIRE(result.finals.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(result.finals[i].stage == Stage::FINAL);
      REQUIRE(result.finals[i].entries.size() == reranker[i].entries.size());
      for (std::size_t j = 0; j < reranker[i].entries.size(); ++j) {
        CHECK(result.finals[i].entries[j].doc_id == reranker[i].entries[j].doc_id);
      }
    }
    // Transcript holds exactly the two adjudicated queries, in input order.
    const auto lines = lines_of(slurp(dir.file("t.jsonl")));
    REQUIRE(lines.size() == 2);
    const auto first = nlohmann::ordered_json::parse(lines[0]);
    CHECK(first.at("query_id") == "q2");
    CHECK(first.at("formulation") == "DIRECT");
    CHECK(first.at("baseline_doc_id") == "p001");
    CHECK(first.at("retriever_top_doc_id") == "p002");
    CHECK(first.at("parse_status") == "OK");
    CHECK(first.at("fell_back") == false);
    CHECK(first.at("selected_doc_id") == "p001");
    CHECK(first.at("attempts") == 1);
    CHECK(first.at("latency_ms") == 0);
    CHECK(first.at("prompt").get<std::string>().find("Return valid JSON only.") !=
          std::string::npos);
    CHECK(nlohmann::ordered_json::parse(lines[1]).at("query_id") == "q3");
  }
  SUBCASE("agreement across the board means zero calls") {
    StubJudgeBackend stub(StubJudgeBackend::Mode::BASELINE, Formulation::DIRECT);
    const JudgeRunResult result = run_judge(retriever, retriever, queries, collection,
                                            stub, options, "");
    CHECK(result.stats.disagreements == 0);
    CHECK(stub.calls() == 0);
    for (const RankedList& list : result.finals) CHECK(list.stage == Stage::FINAL);
  }
  SUBCASE("retriever-top verdicts promote the retriever pick") {
    StubJudgeBackend stub(StubJudgeBackend::Mode::RETRIEVER_TOP, Formulation::DIRECT);
    const JudgeRunResult result =
        run_judge(retriever, reranker, queries, collection, stub, options, "");
    CHECK(result.finals[0].top1() == "p001");  // untouched agreement
    CHECK(result.finals[1].top1() == "p002");  // promoted
    CHECK(result.finals[2].top1() == "p003");  // promoted
    // Everything behind the promoted doc keeps its relative order.
    CHECK(result.finals[1].entries[1].doc_id == "p001");
    CHECK(result.finals[1].entries[2].doc_id == "p004");
  }
  SUBCASE("a dead endpoint degrades to the baseline and flags the run") {
    TempDir dir("judge-fail");
    StubJudgeBackend stub(StubJudgeBackend::Mode::FAIL_TRANSPORT, Formulation::DIRECT);
    const JudgeRunResult result = run_judge(retriever, reranker, queries, collection,
                                            stub, options, dir.file("t.jsonl"));
    CHECK(result.stats.endpoint_failed);
    CHECK(result.stats.transport_failures == 2);
    CHECK(result.finals[1].top1() == reranker[1].top1());
    CHECK(result.finals[2].top1() == reranker[2].top1());
    const auto lines = lines_of(slurp(dir.file("t.jsonl")));
    const auto first = nlohmann::ordered_json::parse(lines[0]);
    CHECK(first.at("parse_status") == "PARSE_FAIL");
    CHECK(first.at("fell_back") == true);
    CHECK(first.at("attempts") == 3);
    CHECK(first.at("error").get<std::string>().find("transport") != std::string::npos);
  }
  SUBCASE("listwise transcripts carry the permutation") {
    TempDir dir("judge-list");
    StubJudgeBackend stub(StubJudgeBackend::Mode::RETRIEVER_TOP, Formulation::LISTWISE);
    JudgeRunOptions listwise = options;
    listwise.formulation = Formulation::LISTWISE;
    const JudgeRunResult result = run_judge(retriever, reranker, queries, collection,
                                            stub, listwise, dir.file("t.jsonl"));
    CHECK(result.finals[1].top1() == "p002");
    const auto first =
        nlohmann::ordered_json::parse(lines_of(slurp(dir.file("t.jsonl")))[0]);
    CHECK(first.at("permutation").is_array());
    CHECK(first.at("permutation")[0].get<int>() == 2);
  }
  SUBCASE("transcripts are byte-identical across runs and thread counts") {
    TempDir dir("judge-repro");
    JudgeRunOptions pairwise = options;
    pairwise.formulation = Formulation::PAIRWISE;
    for (const unsigned workers : {1u, 8u}) {
      pairwise.max_in_flight = workers;
      StubJudgeBackend stub(StubJudgeBackend::Mode::RETRIEVER_TOP,
                            Formulation::PAIRWISE);
      run_judge(retriever, reranker, queries, collection, stub, pairwise,
                dir.file("t" + std::to_string(workers) + ".jsonl"));
    }
    CHECK(slurp(dir.file("t1.jsonl")) == slurp(dir.file("t8.jsonl")));
  }
  SUBCASE("missing inputs are structural errors") {
    StubJudgeBackend stub(StubJudgeBackend::Mode::BASELINE, Formulation::DIRECT);
    const std::vector<RankedList> short_retriever = {retriever[0], retriever[1]};
    CHECK_THROWS_AS(run_judge(short_retriever, reranker, queries, collection, stub,
                              options, ""),
                    InputError);
    const std::vector<QueryRecord> short_queries = {queries[0], queries[1]};
    CHECK_THROWS_AS(run_judge(retriever, reranker, short_queries, collection, stub,
                              options, ""),
                    InputError);
  }
}

TEST_CASE("content digests have known values") {
  CHECK(fnv1a64_text("") == "cbf29ce484222325");
  CHECK(fnv1a64_text("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a64_text("foobar") == "85944171f73967e8");

  TempDir dir("digest");
  { std::ofstream out(dir.file("f.txt"), std::ios::binary); out << "foobar"; }
  CHECK(fnv1a64_file(dir.file("f.txt")) == "85944171f73967e8");
  { std::ofstream out(dir.file("empty.txt")); }
  CHECK(fnv1a64_file(dir.file("empty.txt")) == "cbf29ce484222325");
  CHECK_THROWS_AS(fnv1a64_file(dir.file("missing.txt")), InputError);
}

TEST_CASE("run config JSON round trip is strict") {
  RunConfig config;
  config.k_min = 2;
  config.k_max = 8;
  config.pool_size_retrieve = 100;
  config.pool_size_rerank = 10;
  config.negatives_per_query = 4;
  config.exclude_top_m = 1;
  config.judge_candidates = 5;
  config.truncate_units = 64;
  config.rng_seed = 99;

  const std::string text = run_config_to_json(config);
  const RunConfig back = run_config_from_json(text, "test");
  CHECK(back.k_min == 2);
  CHECK(back.k_max == 8);
  CHECK(back.pool_size_retrieve == 100);
  CHECK(back.pool_size_rerank == 10);
  CHECK(back.negatives_per_query == 4);
  CHECK(back.exclude_top_m == 1);
  CHECK(back.judge_candidates == 5);
  CHECK(back.truncate_units == 64);
  CHECK(back.rng_seed == 99);

  CHECK_THROWS_WITH_AS(run_config_from_json(R"({"pool_siez": 3})", "test"),
                       doctest::Contains("pool_siez"), InputError);
  CHECK_THROWS_AS(run_config_from_json("[1,2]", "test"), InputError);
  CHECK_THROWS_AS(run_config_from_json(R"({"k_min": 9, "k_max": 3})", "test"),
                  InputError);

  SUBCASE("file loader") {
    TempDir dir("config");
    { std::ofstream out(dir.file("c.json")); out << text; }
    CHECK(run_config_from_json_file(dir.file("c.json")).rng_seed == 99);
    CHECK_THROWS_AS(run_config_from_json_file(dir.file("no.json")), InputError);
  }
}

TEST_CASE("manifests pin the run identity but not the wall clock") {
  RunConfig config;
  std::vector<ManifestInput> inputs = {{"collection", "/x/c.jsonl", "0011223344556677"}};
  const RunManifest a = make_manifest(config, inputs);
  const RunManifest b = make_manifest(config, inputs);
  CHECK(a.run_id == b.run_id);
  CHECK(a.tool_version == kVersion);
  CHECK(a.run_id.size() == 16);

  RunConfig other = config;
  other.rng_seed = 123;
  CHECK(make_manifest(other, inputs).run_id != a.run_id);
  std::vector<ManifestInput> changed = inputs;
  changed[0].digest = "ffffffffffffffff";
  CHECK(make_manifest(config, changed).run_id != a.run_id);

  TempDir dir("manifest");
  RunManifest with_stages = a;
  with_stages.stages.push_back({"retrieve", "ok", {"pools.jsonl"}});
  save_manifest(with_stages, dir.file("m.json"));
  const auto obj = nlohmann::ordered_json::parse(slurp(dir.file("m.json")));
  CHECK(obj.at("run_id") == a.run_id);
  CHECK(obj.at("config").at("rng_seed") == 0);
  CHECK(obj.at("inputs")[0].at("role") == "collection");
  CHECK(obj.at("stages")[0].at("status") == "ok");
}

TEST_CASE("full pipeline over a small world") {
  const World world;

  SUBCASE("baseline judge reproduces the reranker and reports correctly") {
    StubJudgeBackend stub(StubJudgeBackend::Mode::BASELINE, Formulation::DIRECT);
    const PipelineResult result =
        run_pipeline(world.inputs(stub, world.dir.file("out")));

    CHECK(result.judge_stats.queries == 3);
    CHECK(result.judge_stats.disagreements == 2);
    CHECK(result.judge_stats.endpoint_calls == 2);
    CHECK_FALSE(result.judge_stats.endpoint_failed);

    // Gold ranks under baseline verdicts: qa 1, qb 2, qc 2.
    CHECK(result.report.per_language.at("EN").mrr == doctest::Approx(0.75));
    CHECK(result.report.per_language.at("DE").mrr == doctest::Approx(0.5));
    CHECK(result.report.macro.mrr == doctest::Approx(0.625));
    CHECK(result.report.per_language.at("EN").recall.at(1) == doctest::Approx(0.5));
    CHECK(result.report.macro.recall.at(5) == doctest::Approx(1.0));
    REQUIRE(result.report.agreement.has_value());
    CHECK(result.report.agreement->n_queries == 3);
    CHECK(result.report.agreement->agreements == 1);
    REQUIRE(result.report.agreement->agree_correct_rate.has_value());
    CHECK(*result.report.agreement->agree_correct_rate == doctest::Approx(1.0));

    for (const std::string& path :
         {result.pools_path, result.reranked_path, result.finals_path,
          result.transcript_path, result.report_json_path, result.report_tsv_path,
          result.manifest_path}) {
      CHECK_FALSE(slurp(path).empty());
    }

    const auto manifest = nlohmann::ordered_json::parse(slurp(result.manifest_path));
    REQUIRE(manifest.at("stages").size() == 4);
    CHECK(manifest.at("stages")[0].at("name") == "retrieve");
    CHECK(manifest.at("stages")[2].at("name") == "judge");
    CHECK(manifest.at("stages")[2].at("status") == "ok");
    CHECK(manifest.at("inputs").size() == 5);

    const auto finals = load_ranked(result.finals_path);
    REQUIRE(finals.size() == 3);
    CHECK(finals[0].stage == Stage::FINAL);
    CHECK(finals[0].top1() == "d1");
    CHECK(finals[1].top1() == "d5");  // baseline kept the reranker's pick
    CHECK(finals[2].top1() == "d6");
  }
  SUBCASE("retriever-top judge fixes both disagreements") {
    StubJudgeBackend stub(StubJudgeBackend::Mode::RETRIEVER_TOP, Formulation::DIRECT);
    const PipelineResult result =
        run_pipeline(world.inputs(stub, world.dir.file("out-rt")));
    CHECK(result.report.macro.mrr == doctest::Approx(1.0));
    CHECK(result.report.macro.recall.at(1) == doctest::Approx(1.0));
    const auto finals = load_ranked(result.finals_path);
    CHECK(finals[1].top1() == "d2");
    CHECK(finals[2].top1() == "d3");
  }
  SUBCASE("reruns are byte-identical, manifest timestamp aside") {
    StubJudgeBackend stub_a(StubJudgeBackend::Mode::RETRIEVER_TOP,
                            Formulation::PAIRWISE);
    StubJudgeBackend stub_b(StubJudgeBackend::Mode::RETRIEVER_TOP,
                            Formulation::PAIRWISE);
    PipelineInputs in_a = world.inputs(stub_a, world.dir.file("run-a"));
    PipelineInputs in_b = world.inputs(stub_b, world.dir.file("run-b"));
    in_a.judge.formulation = Formulation::PAIRWISE;
    in_b.judge.formulation = Formulation::PAIRWISE;
    in_b.workers = 7;  // thread count must not leak into any artifact
    const PipelineResult first = run_pipeline(in_a);
    const PipelineResult second = run_pipeline(in_b);

    CHECK(slurp(first.pools_path) == slurp(second.pools_path));
    CHECK(slurp(first.reranked_path) == slurp(second.reranked_path));
    CHECK(slurp(first.finals_path) == slurp(second.finals_path));
    CHECK(slurp(first.transcript_path) == slurp(second.transcript_path));
    CHECK(slurp(first.report_json_path) == slurp(second.report_json_path));
    CHECK(slurp(first.report_tsv_path) == slurp(second.report_tsv_path));

    auto manifest_a = nlohmann::ordered_json::parse(slurp(first.manifest_path));
    auto manifest_b = nlohmann::ordered_json::parse(slurp(second.manifest_path));
    CHECK(manifest_a.at("run_id") == manifest_b.at("run_id"));
    manifest_a.erase("created_utc");
    manifest_b.erase("created_utc");
    CHECK(manifest_a.dump() == manifest_b.dump());
  }
  SUBCASE("endpoint failure still writes every artifact") {
    StubJudgeBackend stub(StubJudgeBackend::Mode::FAIL_TRANSPORT, Formulation::DIRECT);
    const PipelineResult result =
        run_pipeline(world.inputs(stub, world.dir.file("out-fail")));
    CHECK(result.judge_stats.endpoint_failed);
    const auto manifest = nlohmann::ordered_json::parse(slurp(result.manifest_path));
    CHECK(manifest.at("stages")[2].at("status") == "endpoint_failed");
    CHECK_FALSE(slurp(result.report_json_path).empty());
    // Failure means fallback, so metrics match the baseline run.
    CHECK(result.report.macro.mrr == doctest::Approx(0.625));
  }
  SUBCASE("a gold id missing from the collection fails fast") {
    StubJudgeBackend stub(StubJudgeBackend::Mode::BASELINE, Formulation::DIRECT);
    World broken;
    std::vector<QueryRecord> queries = load_queries(broken.queries_path);
    queries[1].gold_doc_id = "ghost";
    save_queries(queries, broken.queries_path);
    CHECK_THROWS_WITH_AS(run_pipeline(broken.inputs(stub, broken.dir.file("x"))),
                         doctest::Contains("qb"), InputError);
  }
  SUBCASE("missing backend is rejected") {
    PipelineInputs inputs;
    inputs.backend = nullptr;
    CHECK_THROWS_AS(run_pipeline(inputs), InputError);
  }
}
