#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "common.hpp"
#include "kgqa/corpus.hpp"

using namespace kgqa;

static CorpusEntry entry(const std::string& q, const std::string& prog,
                         const std::string& pattern, std::vector<std::string> items,
                         const std::string& anon) {
  CorpusEntry e;
  e.question = q;
  e.program = prog;
  e.pattern = pattern;
  e.schema_items = std::move(items);
  e.complexity = 1;
  e.anonymized_question = anon;
  e.backend_id = "test";
  return e;
}

static ExplorationCorpus three_entry_corpus() {
  return {
      entry("which movie did common.person direct?", "(JOIN movie.directed_by \"p1\")",
            "(JOIN movie.directed_by common.person)", {"movie.directed_by"},
            "which movie did common.person direct?"),
      entry("which movie did common.person produce?", "(JOIN movie.produced_by \"p2\")",
            "(JOIN movie.produced_by common.person)", {"movie.produced_by"},
            "which movie did common.person produce?"),
      entry("what year was movie.movie released?", "(JOIN (R movie.year) \"m1\")",
            "(JOIN (R movie.year) movie.movie)", {"movie.year"},
            "what year was movie.movie released?"),
  };
}

TEST_CASE("corpus round-trips through jsonl") {
  ExplorationCorpus c = three_entry_corpus();
  std::string path = "corpus_roundtrip.jsonl";
  save_corpus(c, path);
  ExplorationCorpus back = load_corpus(path);
  REQUIRE(back.size() == c.size());
  for (size_t i = 0; i < c.size(); ++i) CHECK(back[i] == c[i]);
  std::remove(path.c_str());
}

TEST_CASE("corpus load rejects bad headers and lines") {
  std::string path = "corpus_bad.jsonl";
  {
    std::ofstream f(path);
    f << "# wrong-header v9\n";
  }
  CHECK_THROWS_WITH(load_corpus(path), Catch::Matchers::ContainsSubstring("version mismatch"));
  {
    std::ofstream f(path);
    f << kCorpusHeader << "\n{truncated\n";
  }
  CHECK_THROWS_WITH(load_corpus(path), Catch::Matchers::ContainsSubstring("line 2"));
  {
    std::ofstream f(path);
    f << kCorpusHeader << "\n"
      << R"({"question":"q","program":"(JOIN","pattern":"p","schema_items":[],"complexity":1,"anonymized_question":"q"})"
      << "\n";
  }
  CHECK_THROWS(load_corpus(path));  // malformed program string
  std::remove(path.c_str());
}

TEST_CASE("index builds unit-norm rows") {
  HashedBagEmbedder emb(64);
  IndexedCorpus idx = index(three_entry_corpus(), emb);
  REQUIRE(idx.vectors.size() == 3);
  CHECK(idx.embedder_id == emb.id());
  for (const auto& row : idx.vectors) {
    double n = 0;
    for (double x : row) n += x * x;
    CHECK(n == Catch::Approx(1.0));
  }
  // re-index identical
  IndexedCorpus idx2 = index(three_entry_corpus(), emb);
  CHECK(idx.vectors == idx2.vectors);

  CHECK(retrieve(index(ExplorationCorpus{}, emb), emb, "anything", {}).empty());
}

TEST_CASE("index round-trips through its file format") {
  HashedBagEmbedder emb(64);
  IndexedCorpus idx = index(three_entry_corpus(), emb);
  std::string path = "index_roundtrip.idx";
  save_index(idx, path);
  IndexedCorpus back = load_index(path);
  CHECK(back.embedder_id == idx.embedder_id);
  REQUIRE(back.entries.size() == idx.entries.size());
  for (size_t i = 0; i < idx.entries.size(); ++i) CHECK(back.entries[i] == idx.entries[i]);
  CHECK(back.vectors == idx.vectors);
  std::remove(path.c_str());

  {
    std::ofstream f(path);
    f << R"({"format":"other v0"})" << "\n";
  }
  CHECK_THROWS_WITH(load_index(path), Catch::Matchers::ContainsSubstring("format mismatch"));
  std::remove(path.c_str());
}

TEST_CASE("retrieve ranks by cosine with identity on top") {
  HashedBagEmbedder emb(256);
  IndexedCorpus idx = index(three_entry_corpus(), emb);
  RetrievalConfig cfg;
  cfg.k = 2;
  auto got = retrieve(idx, emb, "which movie did common.person direct?", cfg);
  REQUIRE(got.size() == 2);
  CHECK(got[0].program == "(JOIN movie.directed_by \"p1\")");

  // k larger than corpus: everything, ranked
  cfg.k = 10;
  CHECK(retrieve(idx, emb, "which movie did common.person direct?", cfg).size() == 3);
}

TEST_CASE("coverage mode skips redundant entries then backfills") {
  // two duplicates (same pattern + schema items) + one distinct entry
  ExplorationCorpus c = {
      entry("which movie did common.person direct?", "(JOIN movie.directed_by \"p1\")",
            "(JOIN movie.directed_by common.person)", {"movie.directed_by"},
            "which movie did common.person direct?"),
      entry("which movie did common.person direct them?", "(JOIN movie.directed_by \"p9\")",
            "(JOIN movie.directed_by common.person)", {"movie.directed_by"},
            "which movie did common.person direct them?"),
      entry("what year was movie.movie released?", "(JOIN (R movie.year) \"m1\")",
            "(JOIN (R movie.year) movie.movie)", {"movie.year"},
            "what year was movie.movie released?"),
  };
  HashedBagEmbedder emb(256);
  IndexedCorpus idx = index(c, emb);
  RetrievalConfig cfg;
  cfg.k = 3;
  auto got = retrieve(idx, emb, "which movie did common.person direct?", cfg);
  REQUIRE(got.size() == 3);
  // first duplicate accepted, second skipped for the distinct entry, then backfilled
  CHECK(got[0].program == "(JOIN movie.directed_by \"p1\")");
  CHECK(got[1].program == "(JOIN (R movie.year) \"m1\")");
  CHECK(got[2].program == "(JOIN movie.directed_by \"p9\")");

  // with k <= distinct patterns, returned patterns are pairwise distinct
  cfg.k = 2;
  auto two = retrieve(idx, emb, "which movie did common.person direct?", cfg);
  REQUIRE(two.size() == 2);
  CHECK(two[0].pattern != two[1].pattern);

  // plain mode returns the top-k by rank regardless of redundancy
  cfg.k = 2;
  cfg.coverage_mode = false;
  auto plain = retrieve(idx, emb, "which movie did common.person direct?", cfg);
  REQUIRE(plain.size() == 2);
  CHECK(plain[0].pattern == plain[1].pattern);
}

TEST_CASE("retrieve returns a subset without duplicates") {
  HashedBagEmbedder emb(128);
  IndexedCorpus idx = index(three_entry_corpus(), emb);
  RetrievalConfig cfg;
  cfg.k = 3;
  auto got = retrieve(idx, emb, "movie", cfg);
  std::set<std::string> progs;
  for (const auto& e : got) progs.insert(e.program);
  CHECK(progs.size() == got.size());
  CHECK(got.size() <= 3);
}
