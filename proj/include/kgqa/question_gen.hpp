#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kgqa/corpus.hpp"
#include "kgqa/executor.hpp"
#include "kgqa/kg.hpp"
#include "kgqa/lm.hpp"
#include "kgqa/prompts.hpp"

namespace kgqa {

namespace detail {

// The grounded topic entity: the deepest EntityRef in the program.
inline const Program* deepest_entity(const ProgramPtr& p, int depth, int& best_depth,
                                     const Program*& best) {
  if (p->kind == NodeKind::Entity && depth > best_depth) {
    best_depth = depth;
    best = p.get();
  }
  if (p->child) deepest_entity(p->child, depth + 1, best_depth, best);
  if (p->right) deepest_entity(p->right, depth + 1, best_depth, best);
  return best;
}

inline std::string first_line(const std::string& s) {
  size_t nl = s.find('\n');
  return nl == std::string::npos ? s : s.substr(0, nl);
}

// Single line, trimmed, with a terminal "?" for interrogative (non-COUNT)
// programs; generated questions drift in format otherwise.
inline std::string postprocess_question(const std::string& raw, const ProgramPtr& program) {
  std::string q = trim(first_line(raw));
  if (!q.empty() && program->kind != NodeKind::Count && q.back() != '?') q += "?";
  return q;
}

// Case-insensitive find of `needle` in `haystack`.
inline size_t ci_find(const std::string& haystack, const std::string& needle) {
  if (needle.empty()) return std::string::npos;
  return lowercase(haystack).find(lowercase(needle));
}

}  // namespace detail

// Replace the topic entity's label in the question by its class id; used both
// for corpus anonymized questions and for retrieval queries.
inline std::string anonymize_by_topic(const std::string& question, const ProgramPtr& program,
                                      const KnowledgeGraph& kg) {
  int best_depth = -1;
  const Program* topic = nullptr;
  detail::deepest_entity(program, 0, best_depth, topic);
  if (!topic) return question;
  auto id = kg.resolve_entity(topic->id);
  if (!id) return question;
  std::string label = kg.label_of(*id);
  const auto& classes = kg.classes_of(*id);
  if (classes.empty()) return question;
  size_t pos = detail::ci_find(question, label);
  if (pos == std::string::npos) return question;
  return question.substr(0, pos) + classes.front() + question.substr(pos + label.size());
}

struct QuestionGenConfig {
  int beam_k = 5;
  int max_tokens = 64;
  bool keep_intermediates = false;  // also emit L2M sub-program questions
};

// L2M generation: each sub-program is prompted with all previously generated
// (sub-program, question) pairs as demonstrations; the final program's beam is
// re-ranked by the likelihood of the canonical program under the inverse task.
inline CorpusEntry generate_question(const ProgramPtr& program, const KnowledgeGraph& kg,
                                     LmBackend& lm, const PromptTemplates& templates,
                                     const QuestionGenConfig& cfg = {}) {
  auto elems = decompose_elements(program);
  std::vector<QgenBlock> blocks;
  GenParams greedy{1, cfg.max_tokens, {"\n"}};
  GenParams beam{cfg.beam_k, cfg.max_tokens, {"\n"}};

  std::string question;
  double forward_score = 0.0, inverse_score = 0.0;
  for (size_t i = 0; i < elems.size(); ++i) {
    const auto& e = elems[i];
    QgenBlock b;
    b.program = print(e.printed);
    b.schema = schema_line(kg, prompt_schema_items(e.printed, e.enclosing_class));
    blocks.push_back(b);
    bool final = i + 1 == elems.size();
    std::string prompt = render_qgen_prompt(templates, blocks);
    auto cands = lm.generate(prompt, final ? beam : greedy);
    if (cands.empty()) throw LmError("empty generation for " + b.program);
    for (auto& c : cands) c.text = detail::postprocess_question(c.text, e.printed);
    if (final) {
      std::string target = print(program);
      auto reranked = inverse_rerank(
          lm, cands,
          [&](const GenCandidate& c) { return render_qgen_inverse_prompt(templates, c.text); },
          target);
      question = reranked.front().text;
      forward_score = reranked.front().normalized();
      inverse_score =
          lm.score(render_qgen_inverse_prompt(templates, question), target).normalized();
    }
    blocks.back().question = cands.front().text;
  }
  if (question.empty()) throw LmError("generation produced an empty question");

  CorpusEntry entry;
  entry.question = question;
  entry.program = print(program);
  entry.pattern = pattern_of(program, &kg);
  auto items = schema_items_of(program);
  entry.schema_items.assign(items.begin(), items.end());
  entry.complexity = complexity(program);
  entry.anonymized_question = anonymize_by_topic(question, program, kg);
  entry.backend_id = lm.id();
  entry.forward_score = forward_score;
  entry.inverse_score = inverse_score;
  return entry;
}

struct BuildCorpusResult {
  ExplorationCorpus corpus;
  long failures = 0;
  std::vector<std::string> failure_reasons;
};

inline BuildCorpusResult build_corpus(const std::vector<ProgramPtr>& programs,
                                      const KnowledgeGraph& kg, LmBackend& lm,
                                      const PromptTemplates& templates,
                                      const QuestionGenConfig& cfg = {}) {
  BuildCorpusResult out;
  std::set<std::string> seen;
  for (const auto& p : programs) {
    std::vector<ProgramPtr> to_generate{p};
    if (cfg.keep_intermediates) {
      to_generate.clear();
      for (const auto& e : decompose_elements(p))
        if (execute_nonempty(kg, e.printed)) to_generate.push_back(e.printed);
    }
    for (const auto& g : to_generate) {
      if (!seen.insert(print(g)).second) continue;
      try {
        out.corpus.push_back(generate_question(g, kg, lm, templates, cfg));
      } catch (const std::exception& e) {
        ++out.failures;
        out.failure_reasons.push_back(print(g) + ": " + e.what());
      }
    }
  }
  std::sort(out.corpus.begin(), out.corpus.end(),
            [](const CorpusEntry& a, const CorpusEntry& b) { return a.program < b.program; });
  return out;
}

}  // namespace kgqa
