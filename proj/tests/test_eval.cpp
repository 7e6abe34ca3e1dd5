#include "doctest.h"

#include <algorithm>
#include <fstream>
#include <random>

#include "json.hpp"
#include "sciret/eval.hpp"
#include "support/tmpdir.hpp"

using namespace sciret;

namespace {

RankedList make_list(const std::string& query_id,
                     const std::vector<std::string>& doc_ids,
                     Stage stage = Stage::RETRIEVER) {
  RankedList list;
  list.query_id = query_id;
  list.stage = stage;
  double score = 1.0;
  for (const auto& id : doc_ids) {
    list.entries.push_back({id, score});
    score -= 0.01;
  }
  return list;
}

QueryRecord make_query(const std::string& id, const std::string& lang,
                       const std::string& gold) {
  QueryRecord q;
  q.query_id = id;
  q.language = parse_language(lang);
  q.text_original = "claim " + id;
  if (!gold.empty()) q.gold_doc_id = gold;
  return q;
}

}  // namespace

TEST_CASE("per-query metrics") {
  const RankedList list = make_list("q", {"a", "b", "c", "d", "e", "f"});
  CHECK(reciprocal_rank_at(list, "a", 5) == 1.0);
  CHECK(reciprocal_rank_at(list, "c", 5) == doctest::Approx(1.0 / 3.0));
  CHECK(reciprocal_rank_at(list, "e", 5) == doctest::Approx(1.0 / 5.0));
  CHECK(reciprocal_rank_at(list, "f", 5) == 0.0);  // rank 6, outside cutoff
  CHECK(reciprocal_rank_at(list, "zz", 5) == 0.0);

  CHECK(recall_at(list, "a", 1) == 1.0);
  CHECK(recall_at(list, "b", 1) == 0.0);
  CHECK(recall_at(list, "f", 6) == 1.0);
  CHECK(recall_at(list, "f", 5) == 0.0);
  CHECK(recall_at(list, "zz", 20) == 0.0);

  CHECK_THROWS_AS(reciprocal_rank_at(list, "a", 0), InputError);
  CHECK_THROWS_AS(recall_at(list, "a", 0), InputError);
}

TEST_CASE("aggregate computes per-language and macro blocks") {
  // EN: gold at ranks 1 and 2 -> MRR (1 + 0.5)/2 = 0.75.
  // DE: gold at rank 4 -> MRR 0.25.
  // Macro MRR = (0.75 + 0.25) / 2 = 0.5 regardless of the 2:1 volume skew.
  const std::vector<QueryRecord> queries = {
      make_query("e1", "en", "g1"),
      make_query("e2", "en", "g2"),
      make_query("d1", "de", "g3"),
  };
  const std::vector<RankedList> lists = {
      make_list("e1", {"g1", "x", "y"}),
      make_list("e2", {"x", "g2", "y"}),
      make_list("d1", {"x", "y", "z", "g3"}),
  };
  const std::vector<int> cutoffs = {1, 5};
  const EvalReport report = aggregate(lists, queries, cutoffs, 5);

  CHECK(report.mrr_cutoff == 5);
  REQUIRE(report.per_language.count("EN") == 1);
  REQUIRE(report.per_language.count("DE") == 1);
  CHECK(report.per_language.count("FR") == 0);

  const MetricBlock& en = report.per_language.at("EN");
  CHECK(en.n_queries == 2);
  CHECK(en.mrr == doctest::Approx(0.75));
  CHECK(en.recall.at(1) == doctest::Approx(0.5));
  CHECK(en.recall.at(5) == doctest::Approx(1.0));

  const MetricBlock& de = report.per_language.at("DE");
  CHECK(de.n_queries == 1);
  CHECK(de.mrr == doctest::Approx(0.25));
  CHECK(de.recall.at(1) == doctest::Approx(0.0));

  CHECK(report.macro.n_queries == 3);
  CHECK(report.macro.mrr == doctest::Approx(0.5));
  CHECK(report.macro.recall.at(1) == doctest::Approx(0.25));
  CHECK(report.macro.recall.at(5) == doctest::Approx(1.0));
  CHECK_FALSE(report.agreement.has_value());
}

TEST_CASE("aggregate is bit-identical under input permutation") {
  std::mt19937_64 gen(7);
  std::vector<QueryRecord> queries;
  std::vector<RankedList> lists;
  const char* langs[] = {"en", "de", "fr", "tlh"};
  for (int i = 0; i < 60; ++i) {
    const std::string qid = "q" + std::to_string(i);
    const std::string gold = "g" + std::to_string(i);
    queries.push_back(make_query(qid, langs[i % 4], gold));
    std::vector<std::string> docs;
    for (int j = 0; j < 15; ++j) docs.push_back("f" + std::to_string(i * 100 + j));
    docs[gen() % docs.size()] = gold;  // gold at a random rank
    lists.push_back(make_list(qid, docs));
  }
  const std::vector<int> cutoffs = {1, 5, 10};
  const EvalReport base = aggregate(lists, queries, cutoffs);

  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(lists.begin(), lists.end(), gen);
    std::shuffle(queries.begin(), queries.end(), gen);
    const EvalReport shuffled = aggregate(lists, queries, cutoffs);
    CHECK(render_report_json(shuffled) == render_report_json(base));
    // Stronger than Approx: the doubles must match exactly.
    CHECK(shuffled.macro.mrr == base.macro.mrr);
    for (const auto& [lang, block] : base.per_language) {
      CHECK(shuffled.per_language.at(lang).mrr == block.mrr);
      for (const auto& [cutoff, value] : block.recall) {
        CHECK(shuffled.per_language.at(lang).recall.at(cutoff) == value);
      }
    }
  }
}

TEST_CASE("aggregate rejects coverage mismatches loudly") {
  const std::vector<QueryRecord> queries = {
      make_query("q1", "en", "g1"),
      make_query("q2", "en", "g2"),
  };
  SUBCASE("missing ranked list") {
    const std::vector<RankedList> lists = {make_list("q1", {"g1"})};
    CHECK_THROWS_WITH_AS(aggregate(lists, queries, std::vector<int>{5}),
                         doctest::Contains("q2"), InputError);
  }
  SUBCASE("stray ranked list") {
    const std::vector<RankedList> lists = {
        make_list("q1", {"g1"}), make_list("q2", {"g2"}), make_list("q3", {"x"})};
    CHECK_THROWS_WITH_AS(aggregate(lists, queries, std::vector<int>{5}),
                         doctest::Contains("q3"), InputError);
  }
  SUBCASE("duplicate ranked list") {
    const std::vector<RankedList> lists = {
        make_list("q1", {"g1"}), make_list("q1", {"g1"}), make_list("q2", {"g2"})};
    CHECK_THROWS_AS(aggregate(lists, queries, std::vector<int>{5}), InputError);
  }
  SUBCASE("queries without gold are not expected to be ranked") {
    std::vector<QueryRecord> with_blank = queries;
    with_blank.push_back(make_query("q3", "en", ""));
    const std::vector<RankedList> lists = {make_list("q1", {"g1"}),
                                           make_list("q2", {"g2"})};
    const EvalReport report = aggregate(lists, with_blank, std::vector<int>{5});
    CHECK(report.macro.n_queries == 2);
  }
  SUBCASE("cutoffs must be positive and non-empty") {
    const std::vector<RankedList> lists = {make_list("q1", {"g1"}),
                                           make_list("q2", {"g2"})};
    CHECK_THROWS_AS(aggregate(lists, queries, std::vector<int>{}), InputError);
    CHECK_THROWS_AS(aggregate(lists, queries, std::vector<int>{0}), InputError);
  }
}

TEST_CASE("agreement pairs runs by query id") {
  const std::vector<QueryRecord> queries = {
      make_query("q1", "en", "g1"),
      make_query("q2", "en", "g2"),
      make_query("q3", "de", ""),  // no gold: counted, never graded
      make_query("q4", "de", "g4"),
  };
  const std::vector<RankedList> first = {
      make_list("q1", {"g1", "x"}),
      make_list("q2", {"x", "g2"}),
      make_list("q3", {"a", "b"}),
      make_list("q4", {"y", "g4"}),
  };
  // Present second in a different order to prove pairing is by id.
  const std::vector<RankedList> second = {
      make_list("q4", {"z", "g4"}, Stage::RERANKER),
      make_list("q1", {"g1", "y"}, Stage::RERANKER),
      make_list("q3", {"a", "c"}, Stage::RERANKER),
      make_list("q2", {"x", "w"}, Stage::RERANKER),
  };
  const AgreementBlock block = agreement_report(first, second, queries);
  CHECK(block.n_queries == 4);
  CHECK(block.agreements == 3);  // q1 (g1), q2 (x), q3 (a); q4 differs (y vs z)
  CHECK(block.agreement_rate == doctest::Approx(0.75));
  // Gold-graded agreements: q1 correct, q2 wrong; q3 has no gold.
  REQUIRE(block.agree_correct_rate.has_value());
  CHECK(*block.agree_correct_rate == doctest::Approx(0.5));

  SUBCASE("no agreements leaves correctness empty") {
    const std::vector<QueryRecord> one = {make_query("q1", "en", "g1")};
    const std::vector<RankedList> a = {make_list("q1", {"x", "y"})};
    const std::vector<RankedList> b = {make_list("q1", {"y", "x"})};
    const AgreementBlock none = agreement_report(a, b, one);
    CHECK(none.agreements == 0);
    CHECK_FALSE(none.agree_correct_rate.has_value());
  }
  SUBCASE("mismatched query sets are rejected") {
    const std::vector<RankedList> short_second = {second[0], second[1], second[2]};
    CHECK_THROWS_AS(agreement_report(first, short_second, queries), InputError);
  }
}

TEST_CASE("report renderers") {
  const std::vector<QueryRecord> queries = {
      make_query("q1", "en", "g1"),
      make_query("q2", "fr", "g2"),
  };
  const std::vector<RankedList> lists = {
      make_list("q1", {"g1", "x"}),
      make_list("q2", {"x", "g2"}),
  };
  EvalReport report = aggregate(lists, queries, std::vector<int>{1, 20});

  SUBCASE("json is parseable and carries the macro block") {
    const auto obj = nlohmann::ordered_json::parse(render_report_json(report));
    CHECK(obj.at("mrr_cutoff") == 5);
    CHECK(obj.at("macro").at("mrr@5").get<double>() == doctest::Approx(0.75));
    CHECK(obj.at("per_language").at("EN").at("n_queries") == 1);
    CHECK(obj.at("per_language").at("EN").at("recall").at("20").get<double>() == 1.0);
    CHECK(obj.at("agreement").is_null());
  }
  SUBCASE("agreement block appears when present") {
    report.agreement = AgreementBlock{2, 1, 0.5, 1.0};
    const auto obj = nlohmann::ordered_json::parse(render_report_json(report));
    CHECK(obj.at("agreement").at("agreements") == 1);
    CHECK(obj.at("agreement").at("agree_correct_rate").get<double>() == 1.0);
    report.agreement->agree_correct_rate.reset();
    const auto again = nlohmann::ordered_json::parse(render_report_json(report));
    CHECK(again.at("agreement").at("agree_correct_rate").is_null());
  }
  SUBCASE("tsv has a fixed header and one row per group") {
    const std::string tsv = render_report_tsv(report);
    std::vector<std::string> rows;
    std::size_t start = 0;
    while (start < tsv.size()) {
      const std::size_t stop = tsv.find('\n', start);
      rows.push_back(tsv.substr(start, stop - start));
      if (stop == std::string::npos) break;
      start = stop + 1;
    }
    REQUIRE(rows.size() >= 4);  // header, EN, FR, macro
    CHECK(rows[0] == "group\tn_queries\tmrr@5\trecall@1\trecall@20");
    CHECK(rows[1].substr(0, 3) == "EN\t");
    CHECK(rows[2].substr(0, 3) == "FR\t");
    CHECK(rows[3].substr(0, 6) == "macro\t");
    CHECK(rows[3].find("0.750000") != std::string::npos);
  }
  SUBCASE("files round trip") {
    TempDir dir("report");
    save_report_json(report, dir.file("report.json"));
    save_report_tsv(report, dir.file("report.tsv"));
    std::ifstream json_in(dir.file("report.json"));
    const std::string json_bytes((std::istreambuf_iterator<char>(json_in)),
                                 std::istreambuf_iterator<char>());
    CHECK(json_bytes == render_report_json(report));
  }
}
