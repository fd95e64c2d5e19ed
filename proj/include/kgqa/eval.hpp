#pragma once

#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgqa/corpus.hpp"
#include "kgqa/executor.hpp"
#include "kgqa/explorer.hpp"
#include "kgqa/reasoner.hpp"

namespace kgqa {

// F1 over answer strings; both-empty counts as a perfect match, one-sided
// empty as zero. COUNT predictions enter as the singleton {count}.
inline double f1(const AnswerSet& pred, const std::set<std::string>& gold) {
  std::set<std::string> p = pred.as_strings();
  if (p.empty() && gold.empty()) return 1.0;
  if (p.empty() || gold.empty()) return 0.0;
  size_t inter = 0;
  for (const auto& x : p)
    if (gold.count(x)) ++inter;
  if (inter == 0) return 0.0;
  double precision = double(inter) / double(p.size());
  double recall = double(inter) / double(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

// Every predicted answer is ranked 1, so Hits@1 is intersection non-emptiness.
inline int hits_at_1(const AnswerSet& pred, const std::set<std::string>& gold) {
  for (const auto& x : pred.as_strings())
    if (gold.count(x)) return 1;
  return 0;
}

struct EvalExample {
  std::string qid;
  std::string question;
  std::set<std::string> gold_answers;
  std::string gold_program;  // optional
  std::string level = "other";
  std::vector<Mention> mentions;  // optional gold mentions
  bool has_mentions = false;
};

inline std::vector<EvalExample> load_eval_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open eval file: " + path);
  std::vector<EvalExample> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || line[0] == '#') continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("eval line " + std::to_string(line_no) + ": " + e.what());
    }
    EvalExample e;
    e.qid = j.contains("qid") ? j.at("qid").get<std::string>() : std::to_string(line_no);
    e.question = j.at("question").get<std::string>();
    if (j.contains("answers"))
      for (const auto& a : j.at("answers")) e.gold_answers.insert(a.get<std::string>());
    if (j.contains("s_expression")) e.gold_program = j.at("s_expression").get<std::string>();
    if (j.contains("level")) e.level = j.at("level").get<std::string>();
    if (e.gold_answers.empty() && e.gold_program.empty())
      throw std::runtime_error("eval line " + std::to_string(line_no) +
                               ": needs answers or s_expression");
    if (j.contains("mentions")) {
      e.has_mentions = true;
      for (const auto& m : j.at("mentions")) {
        Mention men;
        std::string kind = m.at("kind").get<std::string>();
        men.kind = kind == "entity" ? MentionKind::Entity
                   : kind == "class" ? MentionKind::Class : MentionKind::Literal;
        men.id = m.at("id").get<std::string>();
        if (m.contains("surface")) men.surface = m.at("surface").get<std::string>();
        if (m.contains("lit_type")) {
          auto t = literal_type_from(m.at("lit_type").get<std::string>());
          if (!t)
            throw std::runtime_error("eval line " + std::to_string(line_no) +
                                     ": bad lit_type");
          men.lit_type = *t;
        }
        if (m.contains("entity_class")) men.entity_class = m.at("entity_class").get<std::string>();
        e.mentions.push_back(men);
      }
    }
    out.push_back(e);
  }
  if (out.empty()) throw std::runtime_error("empty eval set: " + path);
  return out;
}

struct CoverageStats {
  double relations = 0.0, classes = 0.0, patterns = 0.0, subexpressions = 0.0;
  long gold_relations = 0, gold_classes = 0, gold_patterns = 0, gold_subexprs = 0;
  std::vector<std::string> skipped;  // unparseable gold programs

  std::vector<std::pair<std::string, double>> rows() const {
    return {{"Relations", relations},
            {"Classes", classes},
            {"Patterns", patterns},
            {"Sub-expressions", subexpressions}};
  }
};

namespace detail {

struct ExtractedSets {
  std::set<std::string> relations, classes, patterns, subexprs;

  void add_program(const ProgramPtr& p, const KnowledgeGraph* kg) {
    collect_relation_refs(p, relations, classes);
    patterns.insert(pattern_of(p, kg));
    for (const auto& s : subexpressions(p)) subexprs.insert(s);
  }
};

inline double pct_covered(const std::set<std::string>& gold, const std::set<std::string>& have) {
  if (gold.empty()) return 0.0;
  size_t hit = 0;
  for (const auto& g : gold)
    if (have.count(g)) ++hit;
  return 100.0 * double(hit) / double(gold.size());
}

}  // namespace detail

inline CoverageStats coverage_stats(const ExplorationCorpus& corpus,
                                    const std::vector<EvalExample>& eval_set,
                                    const KnowledgeGraph* kg = nullptr) {
  detail::ExtractedSets have, gold;
  CoverageStats out;
  for (const auto& e : corpus) {
    try {
      have.add_program(parse(e.program), kg);
    } catch (const std::exception&) {
      // corpus entries are validated at load; ignore here
    }
  }
  for (const auto& e : eval_set) {
    if (e.gold_program.empty()) continue;
    try {
      gold.add_program(parse(e.gold_program), kg);
    } catch (const std::exception&) {
      out.skipped.push_back(e.qid);
    }
  }
  out.gold_relations = long(gold.relations.size());
  out.gold_classes = long(gold.classes.size());
  out.gold_patterns = long(gold.patterns.size());
  out.gold_subexprs = long(gold.subexprs.size());
  out.relations = detail::pct_covered(gold.relations, have.relations);
  out.classes = detail::pct_covered(gold.classes, have.classes);
  out.patterns = detail::pct_covered(gold.patterns, have.patterns);
  out.subexpressions = detail::pct_covered(gold.subexprs, have.subexprs);
  return out;
}

struct EvalRow {
  std::string qid;
  std::string level;
  double f1 = 0.0;
  int hits1 = 0;
  double latency_seconds = 0.0;
  std::string predicted_program;
  std::string error;
};

struct EvalReport {
  std::vector<EvalRow> rows;  // qid-sorted
  double overall_f1 = 0.0;
  double overall_hits1 = 0.0;
  std::map<std::string, std::pair<double, double>> by_level;  // level -> (f1, hits@1)
  double mean_latency_seconds = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json rows_j = nlohmann::json::array();
    for (const auto& r : rows) {
      rows_j.push_back({{"qid", r.qid},
                        {"level", r.level},
                        {"f1", r.f1},
                        {"hits1", r.hits1},
                        {"latency_seconds", r.latency_seconds},
                        {"predicted_program", r.predicted_program},
                        {"error", r.error}});
    }
    nlohmann::json levels = nlohmann::json::object();
    for (const auto& [lvl, agg] : by_level)
      levels[lvl] = {{"f1", agg.first}, {"hits1", agg.second}};
    return {{"overall", {{"f1", overall_f1}, {"hits1", overall_hits1}}},
            {"by_level", levels},
            {"mean_latency_seconds", mean_latency_seconds},
            {"rows", rows_j}};
  }

  std::string to_tsv() const {
    std::string out = "qid\tlevel\tf1\thits1\tpredicted_program\terror\n";
    char buf[32];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof(buf), "%.4f", r.f1);
      out += r.qid + "\t" + r.level + "\t" + buf + "\t" + std::to_string(r.hits1) + "\t" +
             r.predicted_program + "\t" + r.error + "\n";
    }
    return out;
  }
};

struct EvalRunResult {
  EvalReport report;
  std::vector<ReasonTrace> traces;  // parallel to report.rows
};

inline EvalRunResult run_eval(const KnowledgeGraph& kg, const std::vector<EvalExample>& eval_set,
                              const IndexedCorpus& idx, LmBackend& lm, const Embedder& embedder,
                              const ReasonerConfig& cfg = {},
                              const PromptTemplates& templates = {}) {
  EvalRunResult out;
  std::vector<EvalExample> sorted = eval_set;
  std::sort(sorted.begin(), sorted.end(),
            [](const EvalExample& a, const EvalExample& b) { return a.qid < b.qid; });
  for (const auto& e : sorted) {
    EvalRow row;
    row.qid = e.qid;
    row.level = e.level;
    ReasonTrace trace;
    auto start = std::chrono::steady_clock::now();
    try {
      AnswerResult res = answer(kg, e.question, idx, lm, embedder, cfg, templates,
                                e.has_mentions ? &e.mentions : nullptr);
      row.predicted_program = print(res.program);
      std::set<std::string> gold = e.gold_answers;
      if (gold.empty() && !e.gold_program.empty())
        gold = execute(kg, parse(e.gold_program)).as_strings();
      row.f1 = f1(res.answers, gold);
      row.hits1 = hits_at_1(res.answers, gold);
      trace = res.trace;
    } catch (const std::exception& ex) {
      row.error = ex.what();
    }
    row.latency_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.report.rows.push_back(row);
    out.traces.push_back(trace);
  }

  std::map<std::string, std::vector<const EvalRow*>> groups;
  double f1_sum = 0.0, hits_sum = 0.0, lat_sum = 0.0;
  for (const auto& r : out.report.rows) {
    f1_sum += r.f1;
    hits_sum += r.hits1;
    lat_sum += r.latency_seconds;
    groups[r.level].push_back(&r);
  }
  size_t n = out.report.rows.size();
  out.report.overall_f1 = n ? f1_sum / double(n) : 0.0;
  out.report.overall_hits1 = n ? hits_sum / double(n) : 0.0;
  out.report.mean_latency_seconds = n ? lat_sum / double(n) : 0.0;
  for (const auto& [lvl, rows] : groups) {
    double fs = 0.0, hs = 0.0;
    for (const auto* r : rows) {
      fs += r->f1;
      hs += r->hits1;
    }
    out.report.by_level[lvl] = {fs / double(rows.size()), hs / double(rows.size())};
  }
  return out;
}

// Mean F1 as a function of corpus size, sub-sampled with a fixed seed.
inline std::vector<std::pair<size_t, double>> budget_curve(
    const ExplorationCorpus& corpus, const std::vector<size_t>& sizes,
    const std::vector<EvalExample>& eval_set, const KnowledgeGraph& kg, LmBackend& lm,
    const Embedder& embedder, const ReasonerConfig& cfg = {},
    const PromptTemplates& templates = {}, uint64_t seed = 0) {
  std::vector<std::pair<size_t, double>> out;
  for (size_t k : sizes) {
    if (k == 0) throw std::invalid_argument("budget_curve: size 0");
    if (k > corpus.size()) throw std::invalid_argument("budget_curve: size exceeds corpus");
    std::vector<size_t> order(corpus.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    ExplorationCorpus sub;
    for (size_t i = 0; i < k; ++i) sub.push_back(corpus[order[i]]);
    IndexedCorpus idx = index(sub, embedder);
    EvalRunResult res = run_eval(kg, eval_set, idx, lm, embedder, cfg, templates);
    out.push_back({k, res.report.overall_f1});
  }
  return out;
}

}  // namespace kgqa
