#pragma once

#include <chrono>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "kgqa/corpus.hpp"
#include "kgqa/executor.hpp"
#include "kgqa/explorer.hpp"
#include "kgqa/kg.hpp"
#include "kgqa/lm.hpp"
#include "kgqa/prompts.hpp"

namespace kgqa {

enum class MentionKind { Entity, Class, Literal };

struct Mention {
  size_t begin = 0;
  size_t length = 0;
  std::string surface;
  MentionKind kind = MentionKind::Entity;
  std::string id;  // entity id, class id, or literal lexical form
  LiteralType lit_type = LiteralType::String;
  std::string entity_class;  // entities only

  auto key() const { return std::tie(kind, id, lit_type); }
};

namespace detail {

inline bool word_boundary(const std::string& s, size_t pos) {
  if (pos == 0 || pos >= s.size()) return true;
  auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  return !alnum(s[pos - 1]) || !alnum(s[pos]);
}

inline bool matches_at(const std::string& hay, size_t pos, const std::string& needle) {
  if (pos + needle.size() > hay.size()) return false;
  if (hay.compare(pos, needle.size(), needle) != 0) return false;
  return word_boundary(hay, pos) && word_boundary(hay, pos + needle.size());
}

}  // namespace detail

// Longest-match case-insensitive scan against entity labels/aliases and class
// names, plus numeric/date tokens as literal mentions.
inline std::vector<Mention> link_mentions(const KnowledgeGraph& kg, const std::string& question) {
  struct Surface {
    std::string text;  // lowercased
    MentionKind kind;
    std::string id;
  };
  std::vector<Surface> surfaces;
  for (const auto& [label, ids] : kg.by_label)
    if (!ids.empty()) surfaces.push_back({label, MentionKind::Entity, ids.front()});
  for (const auto& [id, item] : kg.schema) {
    if (item.kind != SchemaKind::Class) continue;
    surfaces.push_back({lowercase(id), MentionKind::Class, id});
    std::string text = lowercase(item.text());
    if (text != lowercase(id)) surfaces.push_back({text, MentionKind::Class, id});
    // naive plural so "movies" still links the class whose text is "movie"
    if (!text.empty() && text.back() != 's')
      surfaces.push_back({text + "s", MentionKind::Class, id});
  }

  std::string q = lowercase(question);
  std::vector<Mention> out;
  size_t i = 0;
  while (i < q.size()) {
    if (!detail::word_boundary(q, i)) {
      ++i;
      continue;
    }
    const Surface* best = nullptr;
    for (const auto& s : surfaces) {
      if (s.text.empty() || !detail::matches_at(q, i, s.text)) continue;
      if (!best || s.text.size() > best->text.size()) best = &s;
    }
    if (best) {
      Mention m;
      m.begin = i;
      m.length = best->text.size();
      m.surface = question.substr(i, m.length);
      m.kind = best->kind;
      m.id = best->id;
      if (m.kind == MentionKind::Entity) {
        const auto& cls = kg.classes_of(m.id);
        m.entity_class = cls.empty() ? "entity" : cls.front();
      }
      out.push_back(m);
      i += m.length;
      continue;
    }
    // numeric / date token
    size_t j = i;
    bool has_dot = false, has_dash = false;
    while (j < q.size() && (std::isdigit(static_cast<unsigned char>(q[j])) ||
                            (q[j] == '.' && !has_dot) || q[j] == '-')) {
      if (q[j] == '.') has_dot = true;
      if (q[j] == '-') has_dash = true;
      ++j;
    }
    if (j > i && std::isdigit(static_cast<unsigned char>(q[i])) &&
        detail::word_boundary(q, j)) {
      std::string tok = q.substr(i, j - i);
      Mention m;
      m.begin = i;
      m.length = tok.size();
      m.surface = tok;
      m.kind = MentionKind::Literal;
      m.id = tok;
      if (has_dash) m.lit_type = LiteralType::Date;
      else if (has_dot) m.lit_type = LiteralType::Float;
      else m.lit_type = LiteralType::Int;
      out.push_back(m);
      i = j;
      continue;
    }
    ++i;
  }
  return out;
}

// Entity mention surfaces replaced by their class ids; the retrieval/pruning
// query form.
inline std::string anonymize_for_retrieval(const std::string& question,
                                           const std::vector<Mention>& mentions) {
  std::vector<MentionSpan> spans;
  for (const auto& m : mentions) {
    if (m.kind != MentionKind::Entity) continue;
    spans.push_back({m.begin, m.length, m.entity_class});
  }
  return anonymize_question(question, spans);
}

struct Candidate {
  ProgramPtr program;
  double score = 0.0;
  int timestep = 0;
};

struct ReasonerConfig {
  int retain_k = 5;
  int best_k = 10;
  int prune_k = 10;
  int t_max = 10;
  double alpha = 0.5;
  double repeat_penalty = 0.1;
  bool repeat_penalty_enabled = true;
  RetrievalConfig retrieval;

  void validate() const {
    if (retain_k < 1 || best_k < 1 || prune_k < 1 || t_max < 1)
      throw std::invalid_argument("reasoner k/t parameters must be >= 1");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("alpha must be in [0,1]");
    if (repeat_penalty < 0.0) throw std::invalid_argument("repeat penalty must be >= 0");
    retrieval.validate();
  }
};

struct TimestepRecord {
  int t = 0;
  size_t pool_size = 0;
  std::vector<std::string> pruned;                    // canonical strings kept after pruning
  std::vector<std::pair<std::string, double>> scored; // canonical string -> final score
  std::vector<std::string> best_after;
  int lm_calls = 0;
};

struct ReasonTrace {
  std::vector<TimestepRecord> steps;
  int total_lm_calls = 0;
  double elapsed_seconds = 0.0;
  std::vector<std::string> demos;  // retrieved demonstration programs
};

inline std::vector<Candidate> init_candidates(const std::vector<Mention>& mentions) {
  if (mentions.empty()) throw std::invalid_argument("no mentions to initialize from");
  std::vector<Candidate> out;
  std::set<std::string> seen;
  for (const auto& m : mentions) {
    ProgramPtr p;
    switch (m.kind) {
      case MentionKind::Entity: p = Program::entity(m.id, /*quoted=*/true); break;
      case MentionKind::Class: p = Program::cls(m.id); break;
      case MentionKind::Literal: p = Program::literal(m.id, m.lit_type); break;
    }
    if (seen.insert(print(p)).second) out.push_back({p, 0.0, 0});
  }
  return out;
}

namespace detail {

inline int repeated_relations(const ProgramPtr& p) {
  std::map<std::string, int> counts;
  std::function<void(const ProgramPtr&)> walk = [&](const ProgramPtr& n) {
    switch (n->kind) {
      case NodeKind::Join: ++counts[n->id]; break;
      case NodeKind::ArgMax:
      case NodeKind::ArgMin:
      case NodeKind::Cmp: ++counts[n->relation]; break;
      default: break;
    }
    if (n->child) walk(n->child);
    if (n->right) walk(n->right);
  };
  walk(p);
  int repeats = 0;
  for (const auto& [_, c] : counts) repeats += c - 1;
  return repeats;
}

// Relations observed with literal objects of the given type anywhere in the kg.
inline std::set<std::string> literal_relations_of_type(const KnowledgeGraph& kg, LiteralType t) {
  std::set<std::string> out;
  auto numeric = [](LiteralType x) { return x == LiteralType::Int || x == LiteralType::Float; };
  for (const auto& tr : kg.triples) {
    if (!tr.object.is_literal) continue;
    if (tr.object.lit_type == t || (numeric(tr.object.lit_type) && numeric(t)))
      out.insert(tr.predicate);
  }
  return out;
}

}  // namespace detail

inline std::vector<Candidate> extend_candidates(const KnowledgeGraph& kg,
                                                const std::vector<Candidate>& prev,
                                                const std::vector<Candidate>& best,
                                                const std::vector<Mention>& mentions,
                                                std::mt19937_64& rng, int timestep) {
  std::vector<Candidate> out;
  std::set<std::string> seen;
  auto add = [&](const ProgramPtr& p) {
    if (complexity(p) > 4) return;
    if (!seen.insert(print(p)).second) return;
    if (execute(kg, p).empty()) return;
    out.push_back({p, 0.0, timestep});
  };

  // comparative seeds from literal mentions
  for (const auto& m : mentions) {
    if (m.kind != MentionKind::Literal) continue;
    for (const auto& r : detail::literal_relations_of_type(kg, m.lit_type)) {
      for (CmpOp op : {CmpOp::Le, CmpOp::Lt, CmpOp::Ge, CmpOp::Gt})
        add(Program::compare(op, r, m.id, m.lit_type));
    }
  }

  for (const auto& c : prev) {
    const ProgramPtr& p = c.program;
    if (p->is_function_root()) continue;  // functions close a program
    std::set<NodeId> s = detail::capped_denotation(kg, p, rng);
    if (s.empty()) continue;

    for (const auto& ref : kg.reachable_schema(s)) {
      if (ref.kind == SchemaKind::Class) {
        if (!(p->kind == NodeKind::Class && p->id == ref.id))
          add(Program::conj(Program::cls(ref.id), p));
      } else {
        // propose both directions; empty ones are discarded by add()
        add(Program::join(ref.id, p, false));
        add(Program::join(ref.id, p, true));
      }
    }

    for (const auto& b : best) {
      if (b.program->is_function_root()) continue;
      if (print(b.program) == print(p)) continue;
      std::set<NodeId> sb = detail::capped_denotation(kg, b.program, rng);
      bool intersects = false;
      for (const auto& n : sb)
        if (s.count(n)) { intersects = true; break; }
      if (intersects) add(Program::conj(p, b.program));
    }

    add(Program::count(p));
    for (const auto& [r, _] : detail::literal_relations(kg, s)) {
      add(Program::arg_extreme(NodeKind::ArgMax, p, r));
      add(Program::arg_extreme(NodeKind::ArgMin, p, r));
    }
  }
  return out;
}

inline std::vector<Candidate> prune(const std::vector<Candidate>& candidates,
                                    const std::string& anonymized_question,
                                    const Embedder& embedder, int prune_k,
                                    const KnowledgeGraph* kg = nullptr) {
  std::vector<double> qv = embedder.embed(anonymized_question);
  struct Keyed {
    double cos;
    std::string canon;
    size_t idx;
  };
  std::vector<Keyed> keyed;
  keyed.reserve(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) {
    std::string pat = pattern_of(candidates[i].program, kg);
    keyed.push_back({cosine(qv, embedder.embed(pat)), print(candidates[i].program), i});
  }
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    if (a.cos != b.cos) return a.cos > b.cos;
    return a.canon < b.canon;
  });
  std::vector<Candidate> out;
  for (const auto& k : keyed) {
    if (out.size() >= size_t(prune_k)) break;
    out.push_back(candidates[k.idx]);
  }
  return out;
}

inline std::vector<Candidate> score_candidates(LmBackend& lm, const PromptTemplates& templates,
                                               const std::string& question,
                                               const std::vector<ReasoningDemo>& demos,
                                               std::vector<Candidate> candidates,
                                               const ReasonerConfig& cfg) {
  if (candidates.empty()) return candidates;
  std::string prompt = render_reasoning_prompt(templates, demos, question);
  std::vector<std::string> completions;
  completions.reserve(candidates.size());
  for (const auto& c : candidates) completions.push_back(print(c.program));
  auto scored = lm.score_batch(prompt, completions);
  for (size_t i = 0; i < candidates.size(); ++i) {
    double s = scored[i].normalized();
    if (cfg.repeat_penalty_enabled)
      s -= cfg.repeat_penalty * detail::repeated_relations(candidates[i].program);
    candidates[i].score = s;
  }
  return candidates;
}

inline Candidate final_rerank(const std::vector<Candidate>& best, const std::string& question,
                              LmBackend& lm, const PromptTemplates& templates, double alpha) {
  if (best.empty()) throw std::invalid_argument("final_rerank: empty best set");
  const Candidate* winner = nullptr;
  double winner_score = 0.0;
  std::string winner_canon;
  for (const auto& c : best) {
    double inv =
        lm.score(render_reasoning_inverse_prompt(templates, print(c.program)), question)
            .normalized();
    double combined = alpha * c.score + (1.0 - alpha) * inv;
    std::string canon = print(c.program);
    if (!winner || combined > winner_score ||
        (combined == winner_score && canon < winner_canon)) {
      winner = &c;
      winner_score = combined;
      winner_canon = canon;
    }
  }
  return *winner;
}

struct AnswerResult {
  ProgramPtr program;
  AnswerSet answers;
  ReasonTrace trace;
};

inline AnswerResult answer(const KnowledgeGraph& kg, const std::string& question,
                           const IndexedCorpus& idx, LmBackend& lm, const Embedder& embedder,
                           const ReasonerConfig& cfg = {},
                           const PromptTemplates& templates = {},
                           const std::vector<Mention>* gold_mentions = nullptr) {
  cfg.validate();
  auto start = std::chrono::steady_clock::now();
  std::vector<Mention> mentions = gold_mentions ? *gold_mentions : link_mentions(kg, question);
  if (mentions.empty()) throw std::runtime_error("no mentions linked in question");

  std::string anon_q = gold_mentions ? question : anonymize_for_retrieval(question, mentions);
  std::vector<ReasoningDemo> demos;
  AnswerResult result;
  for (const auto& e : retrieve(idx, embedder, anon_q, cfg.retrieval)) {
    demos.push_back({e.question, e.program});
    result.trace.demos.push_back(e.program);
  }

  std::mt19937_64 rng(0);
  std::vector<Candidate> prev = init_candidates(mentions);
  std::vector<Candidate> best;
  auto best_key = [&]() {
    std::set<std::string> s;
    for (const auto& c : best) s.insert(print(c.program));
    return s;
  };

  for (int t = 1; t <= cfg.t_max; ++t) {
    TimestepRecord rec;
    rec.t = t;
    std::vector<Candidate> pool = extend_candidates(kg, prev, best, mentions, rng, t);
    // carry current sub-programs forward so they stay eligible for best/merge
    std::set<std::string> pool_seen;
    for (const auto& c : pool) pool_seen.insert(print(c.program));
    for (const auto& c : prev)
      if (pool_seen.insert(print(c.program)).second && !execute(kg, c.program).empty())
        pool.push_back(c);
    rec.pool_size = pool.size();
    if (pool.empty()) {
      if (t == 1) throw std::runtime_error("no executable candidates at t=1");
      break;
    }

    std::vector<Candidate> kept = prune(pool, anon_q, embedder, cfg.prune_k, &kg);
    for (const auto& c : kept) rec.pruned.push_back(print(c.program));

    std::vector<Candidate> scored = score_candidates(lm, templates, question, demos, kept, cfg);
    rec.lm_calls = static_cast<int>(scored.size());
    result.trace.total_lm_calls += rec.lm_calls;
    auto by_score = [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      return print(a.program) < print(b.program);
    };
    std::sort(scored.begin(), scored.end(), by_score);
    for (const auto& c : scored) rec.scored.push_back({print(c.program), c.score});

    auto before = best_key();
    std::map<std::string, Candidate> merged;
    for (const auto& c : best) merged.emplace(print(c.program), c);
    for (const auto& c : scored) {
      auto [it, inserted] = merged.emplace(print(c.program), c);
      if (!inserted && c.score > it->second.score) it->second = c;
    }
    best.clear();
    for (const auto& [_, c] : merged) best.push_back(c);
    std::sort(best.begin(), best.end(), by_score);
    if (best.size() > size_t(cfg.best_k)) best.resize(cfg.best_k);

    prev.assign(scored.begin(),
                scored.begin() + std::min(scored.size(), size_t(cfg.retain_k)));

    for (const auto& c : best) rec.best_after.push_back(print(c.program));
    result.trace.steps.push_back(rec);
    if (best_key() == before) break;  // no new sub-program entered the best set
  }

  if (best.empty()) throw std::runtime_error("reasoner produced no candidates");
  Candidate final = final_rerank(best, question, lm, templates, cfg.alpha);
  result.trace.total_lm_calls += static_cast<int>(best.size());
  result.program = final.program;
  result.answers = execute(kg, final.program);
  result.trace.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace kgqa
