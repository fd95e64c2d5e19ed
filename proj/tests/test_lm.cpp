#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "kgqa/lm.hpp"
#include "kgqa/sha256.hpp"

using namespace kgqa;

TEST_CASE("sha256 known vectors") {
  CHECK(Sha256::hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(Sha256::hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(Sha256::hex("The quick brown fox jumps over the lazy dog") ==
        "d7a8fbb307d7809469ca9abcb0082e4f8d5651e46d3cdb762d02d0bf37c9e592");
}

TEST_CASE("heuristic scores are capped lexical-F1 logs") {
  HeuristicLm lm;
  std::string prompt = "### Question:\nwhich movie did nolan direct\n### Logical Form:\n";
  GenCandidate c = lm.score(prompt, "(JOIN movie.directed_by \"p1\")");
  // overlap {movi, direct} of 5 vs 5 stemmed tokens -> F1 = 0.4
  CHECK(c.token_count == 5);
  CHECK(c.normalized() == Catch::Approx(std::log(0.4 + HeuristicLm::kEps)));
  CHECK(c.normalized() <= 0.0);

  // identical text -> F1 = 1, capped at zero rather than going positive
  GenCandidate perfect = lm.score(prompt, "which movie did nolan direct");
  CHECK(perfect.normalized() == 0.0);

  // disjoint -> strongly negative
  GenCandidate bad = lm.score(prompt, "(COUNT common.person)");
  CHECK(bad.normalized() < std::log(0.01));

  // ranking follows overlap
  CHECK(c.normalized() > bad.normalized());
}

TEST_CASE("heuristic final query line skips headers and blanks") {
  HeuristicLm lm;
  std::string prompt =
      "### Instructions:\nstuff\n\n### Logical Query:\n(JOIN a.b \"x\")\n### English Question:\n";
  // scored against "(JOIN a.b \"x\")", not the trailing header
  CHECK(lm.score(prompt, "(JOIN a.b \"x\")").normalized() == 0.0);
}

TEST_CASE("heuristic generate echoes the query deterministically") {
  HeuristicLm lm;
  auto out1 = lm.generate("### Question:\nwho directed tenet\n### Logical Form:\n", {});
  auto out2 = lm.generate("### Question:\nwho directed tenet\n### Logical Form:\n", {});
  REQUIRE(out1.size() == 1);
  CHECK(out1[0].text == "who directed tenet");
  CHECK(out1[0].text == out2[0].text);
}

TEST_CASE("fixture lm replays recorded scores") {
  std::string path = "fixture_lm_test.jsonl";
  {
    std::ofstream f(path);
    f << "# comment line\n";
    f << nlohmann::json{{"prompt_sha256", Sha256::hex("P1")},
                        {"completion", "alpha"},
                        {"sum_logprob", -2.0},
                        {"token_count", 2}}
             .dump()
      << "\n";
    f << nlohmann::json{{"prompt_sha256", Sha256::hex("P1")},
                        {"completion", "beta"},
                        {"sum_logprob", -1.0},
                        {"token_count", 2}}
             .dump()
      << "\n";
  }
  FixtureLm lm(path);
  CHECK(lm.score("P1", "alpha").sum_logprob == -2.0);
  CHECK_THROWS_AS(lm.score("P1", "gamma"), LmError);
  CHECK_THROWS_AS(lm.score("P2", "alpha"), LmError);
  auto gen = lm.generate("P1", {5, 64, {}});
  REQUIRE(gen.size() == 2);
  CHECK(gen[0].text == "beta");  // higher normalized logprob first
  auto top1 = lm.generate("P1", {1, 64, {}});
  CHECK(top1.size() == 1);
  std::remove(path.c_str());
}

TEST_CASE("fixture lm rejects malformed lines with line numbers") {
  std::string path = "fixture_lm_bad.jsonl";
  {
    std::ofstream f(path);
    f << "{not json\n";
  }
  CHECK_THROWS_WITH(FixtureLm(path), Catch::Matchers::ContainsSubstring("line 1"));
  std::remove(path.c_str());
}

TEST_CASE("inverse_rerank is a permutation ordered by inverse score") {
  HeuristicLm lm;
  std::vector<GenCandidate> cands = {{"who directed tenet", -1.0, 4},
                                     {"unrelated words entirely", -1.0, 3},
                                     {"movies directed by someone", -1.0, 4}};
  std::string target = "(AND movie.movie (JOIN movie.directed_by \"p1\"))";
  auto builder = [](const GenCandidate& c) {
    return "### Question:\n" + c.text + "\n### Semantic Parse:\n";
  };
  auto out = inverse_rerank(lm, cands, builder, target);
  REQUIRE(out.size() == cands.size());

  // brute-force recomputation of the ordering
  std::vector<std::pair<double, std::string>> manual;
  for (const auto& c : cands) manual.push_back({lm.score(builder(c), target).normalized(), c.text});
  std::stable_sort(manual.begin(), manual.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (size_t i = 0; i < out.size(); ++i) CHECK(out[i].text == manual[i].second);

  // permutation: same multiset of texts
  std::multiset<std::string> a, b;
  for (const auto& c : cands) a.insert(c.text);
  for (const auto& c : out) b.insert(c.text);
  CHECK(a == b);

  CHECK_THROWS_AS(inverse_rerank(lm, {}, builder, target), LmError);
}

TEST_CASE("pmi_dc subtracts the domain-conditional score") {
  HeuristicLm lm;
  std::string prompt = "### Question:\nwho directed tenet\n### Logical Form:\n";
  std::string domain = "### Logical Form:\n";
  double pmi = pmi_dc_score(lm, prompt, "(JOIN movie.directed_by \"x\")", domain);
  double joint = lm.score(prompt, "(JOIN movie.directed_by \"x\")").sum_logprob;
  double dom = lm.score(domain, "(JOIN movie.directed_by \"x\")").sum_logprob;
  CHECK(pmi == Catch::Approx(joint - dom));
  CHECK_THROWS_AS(pmi_dc_score(lm, prompt, "x", ""), LmError);
}

TEST_CASE("hashed bag embedder: unit norm, determinism, cosine behavior") {
  HashedBagEmbedder emb(256);
  CHECK(emb.dim() == 256);
  auto v = emb.embed("which movies did Nolan direct");
  double norm = 0;
  for (double x : v) norm += x * x;
  CHECK(norm == Catch::Approx(1.0));
  CHECK(v == emb.embed("which movies did Nolan direct"));
  CHECK(cosine(v, v) == Catch::Approx(1.0));

  auto near = emb.embed("which movies did Nolan direct today");
  auto far = emb.embed("population of antarctica penguins colony");
  CHECK(cosine(v, near) > cosine(v, far));

  CHECK(emb.embed("").size() == 256);  // zero vector, no crash
  CHECK(cosine(emb.embed(""), v) == 0.0);
  CHECK_THROWS(cosine(std::vector<double>(2, 1.0), std::vector<double>(3, 1.0)));
}
