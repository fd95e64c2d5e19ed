// kgqa: command-line surface for the knowledge-graph QA engine.
//
// Subcommands: explore, genq, index, answer, eval, stats, budget-curve, repl.
// See docs/cli.md for file formats and the report/trace JSON schemas.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "kgqa/eval.hpp"
#include "kgqa/lm_http.hpp"
#include "kgqa/question_gen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOpts {
  std::string kg_dir = "data/toykg";
  std::string triples, schema, labels;  // override individual files
  std::string backend = "heuristic";    // heuristic | fixture | http
  std::string fixture_file;
  std::string endpoint, model, cache_dir;
  uint64_t seed = 0;
  int embed_dim = 256;
};

kgqa::KnowledgeGraph load_kg(const GlobalOpts& g) {
  std::string triples = g.triples.empty() ? g.kg_dir + "/triples.tsv" : g.triples;
  std::string schema = g.schema.empty() ? g.kg_dir + "/schema.tsv" : g.schema;
  std::string labels = g.labels.empty() ? g.kg_dir + "/labels.tsv" : g.labels;
  std::ifstream ts(triples), ss(schema);
  if (!ts) throw std::runtime_error("cannot open triples file: " + triples);
  if (!ss) throw std::runtime_error("cannot open schema file: " + schema);
  std::ifstream ls(labels);
  return kgqa::load_graph(ts, ss, ls ? &ls : nullptr);
}

std::unique_ptr<kgqa::LmBackend> make_backend(const GlobalOpts& g) {
  if (g.backend == "heuristic") return std::make_unique<kgqa::HeuristicLm>();
  if (g.backend == "fixture") {
    if (g.fixture_file.empty())
      throw std::runtime_error("--fixture-file is required with --backend fixture");
    return std::make_unique<kgqa::FixtureLm>(g.fixture_file);
  }
  if (g.backend == "http") {
    if (g.endpoint.empty() || g.model.empty())
      throw std::runtime_error("--endpoint and --model are required with --backend http");
    kgqa::HttpLmConfig cfg;
    cfg.endpoint_host = g.endpoint;
    cfg.model = g.model;
    cfg.cache_dir = g.cache_dir;
    return std::make_unique<kgqa::HttpLm>(cfg);
  }
  throw std::runtime_error("unknown backend: " + g.backend);
}

std::vector<kgqa::ProgramPtr> load_programs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open programs file: " + path);
  std::vector<kgqa::ProgramPtr> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = kgqa::trim(line);
    if (t.empty() || t[0] == '#') continue;
    // accept either a bare s-expression or a JSON object with a "program" field
    if (t[0] == '{') t = json::parse(t).at("program").get<std::string>();
    try {
      out.push_back(kgqa::parse(t));
    } catch (const std::exception& e) {
      throw std::runtime_error("programs file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.empty()) throw std::runtime_error("no programs in " + path);
  return out;
}

std::vector<kgqa::Mention> load_mentions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mentions file: " + path);
  json j = json::parse(in);
  std::vector<kgqa::Mention> out;
  for (const auto& m : j) {
    kgqa::Mention men;
    std::string kind = m.at("kind").get<std::string>();
    men.kind = kind == "entity"  ? kgqa::MentionKind::Entity
               : kind == "class" ? kgqa::MentionKind::Class
                                 : kgqa::MentionKind::Literal;
    men.id = m.at("id").get<std::string>();
    if (m.contains("surface")) men.surface = m.at("surface").get<std::string>();
    if (m.contains("lit_type")) {
      auto t = kgqa::literal_type_from(m.at("lit_type").get<std::string>());
      if (!t) throw std::runtime_error("bad lit_type in " + path);
      men.lit_type = *t;
    }
    if (m.contains("entity_class")) men.entity_class = m.at("entity_class").get<std::string>();
    out.push_back(men);
  }
  return out;
}

json trace_to_json(const kgqa::ReasonTrace& trace) {
  json steps = json::array();
  for (const auto& s : trace.steps) {
    json scored = json::array();
    for (const auto& [prog, score] : s.scored) scored.push_back({{"program", prog}, {"score", score}});
    steps.push_back({{"t", s.t},
                     {"pool_size", s.pool_size},
                     {"pruned", s.pruned},
                     {"scored", scored},
                     {"best_after", s.best_after},
                     {"lm_calls", s.lm_calls}});
  }
  return {{"demos", trace.demos},
          {"steps", steps},
          {"total_lm_calls", trace.total_lm_calls},
          {"elapsed_seconds", trace.elapsed_seconds}};
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << body;
}

std::vector<std::string> answers_sorted(const kgqa::AnswerSet& a) {
  auto s = a.as_strings();
  return {s.begin(), s.end()};
}

int run(int argc, char** argv) {
  CLI::App app{"Knowledge-graph question answering via exploration and program synthesis"};
  app.require_subcommand(1);
  app.fallthrough();  // allow global flags after the subcommand name
  GlobalOpts g;
  app.add_option("--kg", g.kg_dir, "KG directory containing triples.tsv/schema.tsv/labels.tsv");
  app.add_option("--triples", g.triples, "Override triples file path");
  app.add_option("--schema", g.schema, "Override schema file path");
  app.add_option("--labels", g.labels, "Override labels file path");
  app.add_option("--backend", g.backend, "LM backend: heuristic | fixture | http");
  app.add_option("--fixture-file", g.fixture_file, "Replay file for the fixture backend");
  app.add_option("--endpoint", g.endpoint, "HTTP backend endpoint host or URL");
  app.add_option("--model", g.model, "HTTP backend model name");
  app.add_option("--cache-dir", g.cache_dir, "Disk cache directory for the HTTP backend");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--embed-dim", g.embed_dim, "Hashed bag-of-words embedding dimension");

  // explore
  auto* explore = app.add_subcommand("explore", "Random-walk exploration of the KG");
  int budget = 200, cap = 5;
  double func_prob = 0.1;
  std::string explore_out;
  explore->add_option("--budget", budget, "Number of programs to collect");
  explore->add_option("--per-pattern-cap", cap, "Max programs per anonymized pattern");
  explore->add_option("--function-probability", func_prob, "Chance of applying a function");
  explore->add_option("--out", explore_out, "Output JSONL path (default stdout)");

  // genq
  auto* genq = app.add_subcommand("genq", "Generate questions for programs (L2M prompting)");
  std::string genq_programs, genq_out;
  bool keep_intermediates = false;
  genq->add_option("--programs", genq_programs, "Program list (one s-expression per line)")
      ->required();
  genq->add_option("--out", genq_out, "Output corpus JSONL path")->required();
  genq->add_flag("--keep-intermediates", keep_intermediates,
                 "Also emit questions for L2M sub-programs");

  // index
  auto* index_cmd = app.add_subcommand("index", "Embed a corpus for retrieval");
  std::string index_corpus, index_out;
  index_cmd->add_option("--corpus", index_corpus, "Corpus JSONL path")->required();
  index_cmd->add_option("--out", index_out, "Output index path")->required();

  // answer
  auto* answer_cmd = app.add_subcommand("answer", "Answer a natural-language question");
  std::string ans_index, ans_question, ans_mentions, ans_trace;
  double alpha = 0.5;
  int prune_k = 10;
  answer_cmd->add_option("--index", ans_index, "Retrieval index path")->required();
  answer_cmd->add_option("--question", ans_question, "Question text")->required();
  answer_cmd->add_option("--gold-mentions", ans_mentions, "JSON mention list (skips linking)");
  answer_cmd->add_option("--alpha", alpha, "Forward/inverse mixing weight");
  answer_cmd->add_option("--prune-k", prune_k, "Candidates scored per timestep");
  answer_cmd->add_option("--trace", ans_trace, "Write the reasoning trace JSON here");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Run a QA evaluation");
  std::string eval_index, eval_dataset, eval_json, eval_tsv;
  double eval_alpha = 0.5;
  int eval_prune_k = 10;
  eval_cmd->add_option("--index", eval_index, "Retrieval index path")->required();
  eval_cmd->add_option("--dataset", eval_dataset, "Eval JSONL path")->required();
  eval_cmd->add_option("--out-json", eval_json, "Write the full report JSON here");
  eval_cmd->add_option("--out-tsv", eval_tsv, "Write the per-example TSV here");
  eval_cmd->add_option("--alpha", eval_alpha, "Forward/inverse mixing weight");
  eval_cmd->add_option("--prune-k", eval_prune_k, "Candidates scored per timestep");

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "Corpus statistics table");
  std::string stats_programs;
  stats_cmd
      ->add_option("--programs", stats_programs,
                   "Programs file (s-expressions, explore JSONL, or corpus JSONL)")
      ->required();

  // budget-curve
  auto* curve_cmd = app.add_subcommand("budget-curve", "Mean F1 vs corpus sub-sample size");
  std::string curve_corpus, curve_dataset, curve_out;
  std::vector<size_t> curve_sizes;
  curve_cmd->add_option("--corpus", curve_corpus, "Corpus JSONL path")->required();
  curve_cmd->add_option("--dataset", curve_dataset, "Eval JSONL path")->required();
  curve_cmd->add_option("--sizes", curve_sizes, "Sub-sample sizes")->required();
  curve_cmd->add_option("--out", curve_out, "Output TSV path (default stdout)");

  // repl
  auto* repl_cmd = app.add_subcommand("repl", "Interactive question loop on stdin");
  std::string repl_index;
  repl_cmd->add_option("--index", repl_index, "Retrieval index path")->required();

  CLI11_PARSE(app, argc, argv);

  kgqa::PromptTemplates templates;
  kgqa::HashedBagEmbedder embedder(g.embed_dim);

  if (explore->parsed()) {
    kgqa::KnowledgeGraph kg = load_kg(g);
    kgqa::ExplorationConfig cfg;
    cfg.budget = budget;
    cfg.per_pattern_cap = cap;
    cfg.function_probability = func_prob;
    cfg.rng_seed = g.seed;
    kgqa::ExplorationResult res = kgqa::explore(kg, cfg);
    std::ostringstream lines;
    for (const auto& p : res.programs) {
      json j{{"program", kgqa::print(p)},
             {"pattern", kgqa::pattern_of(p, &kg)},
             {"complexity", kgqa::complexity(p)},
             {"answer_size", kgqa::execute(kg, p).as_strings().size()}};
      lines << j.dump() << "\n";
    }
    if (explore_out.empty()) std::cout << lines.str();
    else write_file(explore_out, lines.str());
    for (const auto& [k, v] : kgqa::stats(res, &kg).rows()) std::cerr << k << "\t" << v << "\n";
    return 0;
  }

  if (genq->parsed()) {
    kgqa::KnowledgeGraph kg = load_kg(g);
    auto lm = make_backend(g);
    kgqa::QuestionGenConfig cfg;
    cfg.keep_intermediates = keep_intermediates;
    kgqa::BuildCorpusResult res =
        kgqa::build_corpus(load_programs(genq_programs), kg, *lm, templates, cfg);
    kgqa::save_corpus(res.corpus, genq_out);
    std::cerr << "wrote " << res.corpus.size() << " entries to " << genq_out << " ("
              << res.failures << " failures)\n";
    for (const auto& r : res.failure_reasons) std::cerr << "  failed: " << r << "\n";
    return res.corpus.empty() ? 1 : 0;
  }

  if (index_cmd->parsed()) {
    kgqa::IndexedCorpus idx = kgqa::index(kgqa::load_corpus(index_corpus), embedder);
    kgqa::save_index(idx, index_out);
    std::cerr << "indexed " << idx.entries.size() << " entries with " << idx.embedder_id << "\n";
    return 0;
  }

  if (answer_cmd->parsed()) {
    kgqa::KnowledgeGraph kg = load_kg(g);
    auto lm = make_backend(g);
    kgqa::IndexedCorpus idx = kgqa::load_index(ans_index);
    kgqa::ReasonerConfig cfg;
    cfg.alpha = alpha;
    cfg.prune_k = prune_k;
    std::vector<kgqa::Mention> gold;
    if (!ans_mentions.empty()) gold = load_mentions(ans_mentions);
    kgqa::AnswerResult res = kgqa::answer(kg, ans_question, idx, *lm, embedder, cfg, templates,
                                          ans_mentions.empty() ? nullptr : &gold);
    json out{{"question", ans_question},
             {"program", kgqa::print(res.program)},
             {"answers", answers_sorted(res.answers)}};
    std::cout << out.dump(2) << "\n";
    if (!ans_trace.empty()) write_file(ans_trace, trace_to_json(res.trace).dump(2) + "\n");
    return 0;
  }

  if (eval_cmd->parsed()) {
    kgqa::KnowledgeGraph kg = load_kg(g);
    auto lm = make_backend(g);
    kgqa::IndexedCorpus idx = kgqa::load_index(eval_index);
    kgqa::ReasonerConfig cfg;
    cfg.alpha = eval_alpha;
    cfg.prune_k = eval_prune_k;
    kgqa::EvalRunResult res =
        kgqa::run_eval(kg, kgqa::load_eval_set(eval_dataset), idx, *lm, embedder, cfg, templates);
    if (!eval_json.empty()) write_file(eval_json, res.report.to_json().dump(2) + "\n");
    if (!eval_tsv.empty()) write_file(eval_tsv, res.report.to_tsv());
    std::cout << "overall\tf1=" << res.report.overall_f1 << "\thits@1=" << res.report.overall_hits1
              << "\n";
    for (const auto& [lvl, agg] : res.report.by_level)
      std::cout << lvl << "\tf1=" << agg.first << "\thits@1=" << agg.second << "\n";
    return 0;
  }

  if (stats_cmd->parsed()) {
    kgqa::KnowledgeGraph kg = load_kg(g);
    kgqa::ExplorationResult res;
    res.programs = load_programs(stats_programs);
    for (const auto& [k, v] : kgqa::stats(res, &kg).rows()) std::cout << k << "\t" << v << "\n";
    return 0;
  }

  if (curve_cmd->parsed()) {
    kgqa::KnowledgeGraph kg = load_kg(g);
    auto lm = make_backend(g);
    auto curve = kgqa::budget_curve(kgqa::load_corpus(curve_corpus), curve_sizes,
                                    kgqa::load_eval_set(curve_dataset), kg, *lm, embedder, {},
                                    templates, g.seed);
    std::ostringstream tsv;
    tsv << "size\tf1\n";
    for (const auto& [k, f] : curve) tsv << k << "\t" << f << "\n";
    if (curve_out.empty()) std::cout << tsv.str();
    else write_file(curve_out, tsv.str());
    return 0;
  }

  if (repl_cmd->parsed()) {
    kgqa::KnowledgeGraph kg = load_kg(g);
    auto lm = make_backend(g);
    kgqa::IndexedCorpus idx = kgqa::load_index(repl_index);
    std::string line;
    std::cerr << "enter a question per line (ctrl-d to exit)\n";
    while (std::getline(std::cin, line)) {
      if (kgqa::trim(line).empty()) continue;
      try {
        kgqa::AnswerResult res = kgqa::answer(kg, line, idx, *lm, embedder, {}, templates);
        std::cout << kgqa::print(res.program) << "\n";
        for (const auto& a : answers_sorted(res.answers)) std::cout << "  " << a << "\n";
      } catch (const std::exception& e) {
        std::cout << "error: " << e.what() << "\n";
      }
    }
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "kgqa: " << e.what() << "\n";
    return 1;
  }
}
