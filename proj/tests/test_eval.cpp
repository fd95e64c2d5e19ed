#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "common.hpp"
#include "kgqa/eval.hpp"
#include "kgqa/question_gen.hpp"

using namespace kgqa;

namespace {

AnswerSet entity_answers(const KnowledgeGraph& kg, const std::string& prog) {
  return execute(kg, parse(prog));
}

ExplorationCorpus toy_corpus(const KnowledgeGraph& kg) {
  HeuristicLm lm;
  PromptTemplates t;
  std::vector<ProgramPtr> programs = {
      parse("(AND movie.movie (JOIN movie.directed_by \"p1\"))"),
      parse("(AND movie.movie (JOIN movie.produced_by \"p2\"))"),
      parse("(JOIN (R movie.year) \"m1\")"),
      parse("(COUNT (JOIN movie.directed_by \"p1\"))"),
  };
  return build_corpus(programs, kg, lm, t).corpus;
}

std::string write_temp(const std::string& name, const std::string& body) {
  std::ofstream f(name);
  f << body;
  return name;
}

}  // namespace

TEST_CASE("f1 and hits@1 hand cases") {
  KnowledgeGraph kg = test::load_toykg();
  AnswerSet pred = entity_answers(kg, "(JOIN movie.directed_by \"p1\")");  // {m1,m2,m3}
  CHECK(f1(pred, {"m1", "m2", "m3"}) == Catch::Approx(1.0));
  CHECK(hits_at_1(pred, {"m1", "m2", "m3"}) == 1);
  // pred {m1,m2,m3} vs gold {m3,x}: inter=1, P=1/3, R=1/2 -> 0.4
  CHECK(f1(pred, {"m3", "x"}) == Catch::Approx(0.4));
  CHECK(hits_at_1(pred, {"m3", "x"}) == 1);
  CHECK(f1(pred, {"zzz"}) == 0.0);
  CHECK(hits_at_1(pred, {"zzz"}) == 0);

  AnswerSet empty;
  CHECK(f1(empty, {}) == 1.0);
  CHECK(f1(empty, {"a"}) == 0.0);
  CHECK(f1(pred, {}) == 0.0);
  CHECK(hits_at_1(empty, {}) == 0);

  // counts compare as the singleton string
  AnswerSet cnt = entity_answers(kg, "(COUNT (JOIN movie.directed_by \"p1\"))");
  CHECK(f1(cnt, {"3"}) == Catch::Approx(1.0));
  CHECK(f1(cnt, {"4"}) == 0.0);
}

TEST_CASE("load_eval_set parses fields and rejects bad input") {
  std::string path = write_temp(
      "eval_ok.jsonl",
      R"({"qid":"q2","question":"who?","answers":["p1"],"level":"iid"})"
      "\n"
      R"x({"qid":"q1","question":"what?","s_expression":"(JOIN movie.directed_by \"p1\")","mentions":[{"kind":"entity","id":"p1","surface":"Nolan","entity_class":"common.person"},{"kind":"literal","id":"2010","lit_type":"int"}]})x"
      "\n");
  auto ex = load_eval_set(path);
  REQUIRE(ex.size() == 2);
  CHECK(ex[0].qid == "q2");
  CHECK(ex[0].level == "iid");
  CHECK(ex[0].gold_answers == std::set<std::string>{"p1"});
  CHECK(ex[1].level == "other");  // default
  CHECK(ex[1].gold_program == "(JOIN movie.directed_by \"p1\")");
  REQUIRE(ex[1].has_mentions);
  REQUIRE(ex[1].mentions.size() == 2);
  CHECK(ex[1].mentions[0].kind == MentionKind::Entity);
  CHECK(ex[1].mentions[0].entity_class == "common.person");
  CHECK(ex[1].mentions[1].lit_type == LiteralType::Int);
  std::remove(path.c_str());

  path = write_temp("eval_bad1.jsonl", "{not json\n");
  CHECK_THROWS_WITH(load_eval_set(path), Catch::Matchers::ContainsSubstring("line 1"));
  std::remove(path.c_str());

  path = write_temp("eval_bad2.jsonl", R"({"qid":"q1","question":"no gold"})"
                                       "\n");
  CHECK_THROWS_WITH(load_eval_set(path),
                    Catch::Matchers::ContainsSubstring("needs answers or s_expression"));
  std::remove(path.c_str());

  path = write_temp(
      "eval_bad3.jsonl",
      R"({"qid":"q1","question":"q","answers":["a"],"mentions":[{"kind":"literal","id":"1","lit_type":"decimal"}]})"
      "\n");
  CHECK_THROWS_WITH(load_eval_set(path), Catch::Matchers::ContainsSubstring("bad lit_type"));
  std::remove(path.c_str());

  path = write_temp("eval_empty.jsonl", "# only a comment\n");
  CHECK_THROWS_WITH(load_eval_set(path), Catch::Matchers::ContainsSubstring("empty eval set"));
  std::remove(path.c_str());
}

TEST_CASE("coverage_stats hand-counted percentages and monotonicity") {
  KnowledgeGraph kg = test::load_toykg();
  std::vector<EvalExample> eval_set(3);
  eval_set[0].qid = "q1";
  eval_set[0].question = "a";
  eval_set[0].gold_program = "(JOIN movie.directed_by \"p1\")";
  eval_set[1].qid = "q2";
  eval_set[1].question = "b";
  eval_set[1].gold_program = "(JOIN (R movie.year) \"m1\")";
  eval_set[2].qid = "q3";
  eval_set[2].question = "c";
  eval_set[2].gold_program = "(JOIN broken";  // unparseable: skipped

  CorpusEntry have;
  have.program = "(JOIN movie.directed_by \"p1\")";
  ExplorationCorpus corpus = {have};

  CoverageStats s = coverage_stats(corpus, eval_set, &kg);
  // gold relations: movie.directed_by and the reverse form "(R movie.year)"
  CHECK(s.gold_relations == 2);
  CHECK(s.relations == Catch::Approx(50.0));
  CHECK(s.gold_patterns == 2);
  CHECK(s.patterns == Catch::Approx(50.0));
  CHECK(s.gold_classes == 0);
  CHECK(s.classes == 0.0);
  CHECK(s.subexpressions > 0.0);
  CHECK(s.subexpressions < 100.0);
  REQUIRE(s.skipped.size() == 1);
  CHECK(s.skipped[0] == "q3");

  // growing the corpus never lowers coverage; full corpus reaches 100
  CorpusEntry more;
  more.program = "(JOIN (R movie.year) \"m1\")";
  corpus.push_back(more);
  CoverageStats s2 = coverage_stats(corpus, eval_set, &kg);
  CHECK(s2.relations >= s.relations);
  CHECK(s2.patterns >= s.patterns);
  CHECK(s2.subexpressions >= s.subexpressions);
  CHECK(s2.relations == Catch::Approx(100.0));
  CHECK(s2.patterns == Catch::Approx(100.0));
  CHECK(s2.subexpressions == Catch::Approx(100.0));

  // empty corpus: zero coverage, gold tallies preserved
  CoverageStats z = coverage_stats({}, eval_set, &kg);
  CHECK(z.relations == 0.0);
  CHECK(z.patterns == 0.0);
  CHECK(z.gold_relations == 2);

  auto rows = s.rows();
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].first == "Relations");
}

TEST_CASE("run_eval aggregates are means over qid-sorted rows") {
  KnowledgeGraph kg = test::load_toykg();
  HeuristicLm lm;
  HashedBagEmbedder emb(256);
  IndexedCorpus idx = index(toy_corpus(kg), emb);

  std::vector<EvalExample> eval_set(3);
  eval_set[0].qid = "q2";
  eval_set[0].question = "which movie did Emma Thomas produce?";
  eval_set[0].gold_answers = {"m1"};
  eval_set[0].level = "iid";
  eval_set[1].qid = "q1";
  eval_set[1].question = "which movie was released after 2015?";
  eval_set[1].gold_answers = {"m2"};
  eval_set[1].level = "iid";
  eval_set[2].qid = "q3";
  eval_set[2].question = "zzz unrelated gibberish";  // no mentions: failure row
  eval_set[2].gold_answers = {"m1"};
  eval_set[2].level = "zero-shot";

  EvalRunResult res = run_eval(kg, eval_set, idx, lm, emb);
  REQUIRE(res.report.rows.size() == 3);
  REQUIRE(res.traces.size() == 3);
  CHECK(res.report.rows[0].qid == "q1");
  CHECK(res.report.rows[1].qid == "q2");
  CHECK(res.report.rows[2].qid == "q3");

  const auto& rows = res.report.rows;
  CHECK(rows[2].f1 == 0.0);
  CHECK(!rows[2].error.empty());
  CHECK(rows[2].predicted_program.empty());

  double mean_f1 = (rows[0].f1 + rows[1].f1 + rows[2].f1) / 3.0;
  double mean_h = (rows[0].hits1 + rows[1].hits1 + rows[2].hits1) / 3.0;
  CHECK(res.report.overall_f1 == Catch::Approx(mean_f1).margin(1e-9));
  CHECK(res.report.overall_hits1 == Catch::Approx(mean_h).margin(1e-9));

  REQUIRE(res.report.by_level.count("iid") == 1);
  REQUIRE(res.report.by_level.count("zero-shot") == 1);
  CHECK(res.report.by_level.at("iid").first ==
        Catch::Approx((rows[0].f1 + rows[1].f1) / 2.0).margin(1e-9));
  CHECK(res.report.by_level.at("zero-shot").first == 0.0);

  // the two linkable questions resolve to their gold denotations
  CHECK(rows[0].f1 == Catch::Approx(1.0));
  CHECK(rows[1].f1 == Catch::Approx(1.0));

  // serializations include every row
  nlohmann::json j = res.report.to_json();
  CHECK(j.at("rows").size() == 3);
  CHECK(j.at("overall").at("f1").get<double>() == Catch::Approx(res.report.overall_f1));
  std::string tsv = res.report.to_tsv();
  CHECK(tsv.find("q3\tzero-shot\t0.0000") != std::string::npos);
}

TEST_CASE("budget_curve degenerate and error cases") {
  KnowledgeGraph kg = test::load_toykg();
  HeuristicLm lm;
  HashedBagEmbedder emb(256);
  ExplorationCorpus corpus = toy_corpus(kg);

  std::vector<EvalExample> eval_set(1);
  eval_set[0].qid = "q1";
  eval_set[0].question = "which movie did Christopher Nolan direct?";
  eval_set[0].gold_answers = {"m1", "m2", "m3"};

  // using the whole corpus matches a plain run over the full index
  auto curve = budget_curve(corpus, {corpus.size()}, eval_set, kg, lm, emb);
  REQUIRE(curve.size() == 1);
  CHECK(curve[0].first == corpus.size());
  EvalRunResult full = run_eval(kg, eval_set, index(corpus, emb), lm, emb);
  CHECK(curve[0].second == Catch::Approx(full.report.overall_f1).margin(1e-9));

  // deterministic for a fixed seed
  auto curve2 = budget_curve(corpus, {1, 2}, eval_set, kg, lm, emb, {}, {}, 42);
  auto curve3 = budget_curve(corpus, {1, 2}, eval_set, kg, lm, emb, {}, {}, 42);
  REQUIRE(curve2.size() == 2);
  CHECK(curve2 == curve3);

  CHECK_THROWS_AS(budget_curve(corpus, {0}, eval_set, kg, lm, emb), std::invalid_argument);
  CHECK_THROWS_AS(budget_curve(corpus, {corpus.size() + 1}, eval_set, kg, lm, emb),
                  std::invalid_argument);
}
