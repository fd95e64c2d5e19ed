#pragma once

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgqa/lm.hpp"
#include "kgqa/program.hpp"

namespace kgqa {

struct CorpusEntry {
  std::string question;
  std::string program;  // canonical string
  std::string pattern;
  std::vector<std::string> schema_items;
  int complexity = 0;
  std::string anonymized_question;
  // generation metadata
  std::string backend_id;
  double forward_score = 0.0;
  double inverse_score = 0.0;

  bool operator==(const CorpusEntry& o) const {
    return question == o.question && program == o.program && pattern == o.pattern &&
           schema_items == o.schema_items && complexity == o.complexity &&
           anonymized_question == o.anonymized_question && backend_id == o.backend_id &&
           forward_score == o.forward_score && inverse_score == o.inverse_score;
  }
};

using ExplorationCorpus = std::vector<CorpusEntry>;

inline constexpr const char* kCorpusHeader = "# kgqa-corpus v1";

inline nlohmann::json entry_to_json(const CorpusEntry& e) {
  return {{"question", e.question},
          {"program", e.program},
          {"pattern", e.pattern},
          {"schema_items", e.schema_items},
          {"complexity", e.complexity},
          {"anonymized_question", e.anonymized_question},
          {"meta",
           {{"backend", e.backend_id},
            {"forward_score", e.forward_score},
            {"inverse_score", e.inverse_score}}}};
}

inline CorpusEntry entry_from_json(const nlohmann::json& j) {
  CorpusEntry e;
  e.question = j.at("question").get<std::string>();
  e.program = j.at("program").get<std::string>();
  e.pattern = j.at("pattern").get<std::string>();
  e.schema_items = j.at("schema_items").get<std::vector<std::string>>();
  e.complexity = j.at("complexity").get<int>();
  e.anonymized_question = j.at("anonymized_question").get<std::string>();
  if (j.contains("meta")) {
    const auto& m = j.at("meta");
    e.backend_id = m.value("backend", "");
    e.forward_score = m.value("forward_score", 0.0);
    e.inverse_score = m.value("inverse_score", 0.0);
  }
  return e;
}

inline void save_corpus(const ExplorationCorpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  out << kCorpusHeader << "\n";
  for (const auto& e : corpus) out << entry_to_json(e).dump() << "\n";
}

inline ExplorationCorpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCorpusHeader)
    throw std::runtime_error("corpus version mismatch: expected '" + std::string(kCorpusHeader) +
                             "', got '" + trim(line) + "'");
  ExplorationCorpus corpus;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || line[0] == '#') continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
    CorpusEntry e;
    try {
      e = entry_from_json(j);
    } catch (const std::exception& ex) {
      throw std::runtime_error("corpus line " + std::to_string(line_no) + ": " + ex.what());
    }
    parse(e.program);  // throws on malformed program
    corpus.push_back(e);
  }
  return corpus;
}

struct RetrievalConfig {
  int k = 10;
  bool coverage_mode = true;

  void validate() const {
    if (k < 1) throw std::invalid_argument("retrieval k must be >= 1");
  }
};

// Immutable after build; safe for concurrent retrievals.
struct IndexedCorpus {
  ExplorationCorpus entries;
  std::vector<std::vector<double>> vectors;  // embed(anonymized_question), unit-norm rows
  std::string embedder_id;
};

inline IndexedCorpus index(const ExplorationCorpus& corpus, const Embedder& embedder) {
  IndexedCorpus out;
  out.entries = corpus;
  out.embedder_id = embedder.id();
  out.vectors.reserve(corpus.size());
  for (const auto& e : corpus) out.vectors.push_back(embedder.embed(e.anonymized_question));
  return out;
}

inline constexpr const char* kIndexFormat = "kgqa-index v1";

inline void save_index(const IndexedCorpus& idx, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write index file: " + path);
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : idx.entries) entries.push_back(entry_to_json(e));
  nlohmann::json j{{"format", kIndexFormat},
                   {"embedder_id", idx.embedder_id},
                   {"entries", entries},
                   {"vectors", idx.vectors}};
  out << j.dump() << "\n";
}

inline IndexedCorpus load_index(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open index file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw std::runtime_error("index file " + path + ": " + e.what());
  }
  if (j.value("format", "") != kIndexFormat)
    throw std::runtime_error("index format mismatch in " + path + ": expected '" +
                             std::string(kIndexFormat) + "'");
  IndexedCorpus idx;
  idx.embedder_id = j.at("embedder_id").get<std::string>();
  for (const auto& e : j.at("entries")) idx.entries.push_back(entry_from_json(e));
  idx.vectors = j.at("vectors").get<std::vector<std::vector<double>>>();
  if (idx.vectors.size() != idx.entries.size())
    throw std::runtime_error("index file " + path + ": vector/entry count mismatch");
  return idx;
}

inline std::vector<CorpusEntry> retrieve(const IndexedCorpus& idx, const Embedder& embedder,
                                         const std::string& anonymized_query,
                                         const RetrievalConfig& cfg) {
  cfg.validate();
  if (idx.entries.empty()) return {};
  std::vector<double> q = embedder.embed(anonymized_query);
  std::vector<std::pair<double, size_t>> ranked;
  ranked.reserve(idx.entries.size());
  for (size_t i = 0; i < idx.entries.size(); ++i) ranked.push_back({cosine(q, idx.vectors[i]), i});
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first > b.first;  // ties keep entry ordinal order
  });

  size_t k = size_t(cfg.k);
  std::vector<size_t> accepted;
  if (!cfg.coverage_mode) {
    for (const auto& [_, i] : ranked) {
      if (accepted.size() >= k) break;
      accepted.push_back(i);
    }
  } else {
    std::set<std::string> covered_items, covered_patterns;
    std::set<size_t> taken;
    for (const auto& [_, i] : ranked) {
      if (accepted.size() >= k) break;
      const CorpusEntry& e = idx.entries[i];
      bool new_item = false;
      for (const auto& s : e.schema_items)
        if (!covered_items.count(s)) new_item = true;
      if (!new_item && covered_patterns.count(e.pattern)) continue;
      accepted.push_back(i);
      taken.insert(i);
      covered_patterns.insert(e.pattern);
      for (const auto& s : e.schema_items) covered_items.insert(s);
    }
    // backfill by rank, duplicates-in-pattern allowed
    for (const auto& [_, i] : ranked) {
      if (accepted.size() >= k) break;
      if (!taken.count(i)) {
        accepted.push_back(i);
        taken.insert(i);
      }
    }
  }

  std::vector<CorpusEntry> out;
  out.reserve(accepted.size());
  for (size_t i : accepted) out.push_back(idx.entries[i]);
  return out;
}

}  // namespace kgqa
