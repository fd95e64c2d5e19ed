#pragma once

#include <chrono>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "kgqa/executor.hpp"
#include "kgqa/kg.hpp"
#include "kgqa/program.hpp"

namespace kgqa {

struct ExplorationConfig {
  long budget = 10000;
  int per_pattern_cap = 5;
  std::vector<double> hop_weights = {0.25, 0.25, 0.25, 0.25};  // complexities 1..4
  double function_probability = 0.0;
  std::set<std::string> function_set = {"COUNT", "ARGMAX", "ARGMIN", "le", "lt", "ge", "gt"};
  int grounding_attempts = 100;
  long max_walk_retries = 0;  // 0: derive as 20 * budget
  uint64_t rng_seed = 0;

  long retry_limit() const { return max_walk_retries > 0 ? max_walk_retries : 20 * budget; }

  void validate() const {
    if (budget < 1) throw std::invalid_argument("exploration budget must be >= 1");
    if (per_pattern_cap < 1) throw std::invalid_argument("per_pattern_cap must be >= 1");
    if (hop_weights.size() != 4) throw std::invalid_argument("hop_weights must cover 1..4 hops");
    double sum = 0.0;
    for (double w : hop_weights) {
      if (w < 0.0) throw std::invalid_argument("hop_weights must be non-negative");
      sum += w;
    }
    if (sum <= 0.0) throw std::invalid_argument("hop_weights must have positive mass");
    if (function_probability < 0.0 || function_probability > 1.0)
      throw std::invalid_argument("function_probability must be in [0,1]");
    static const std::set<std::string> kKnown = {"COUNT", "ARGMAX", "ARGMIN",
                                                "le",    "lt",     "ge",    "gt"};
    for (const auto& f : function_set)
      if (!kKnown.count(f)) throw std::invalid_argument("unknown program function: " + f);
  }
};

struct ExplorationResult {
  std::vector<ProgramPtr> programs;
  std::map<std::string, int> pattern_counts;
  long walks_attempted = 0;
  long walks_rejected = 0;
  long groundings_failed = 0;
  double elapsed_seconds = 0.0;
};

namespace detail {

constexpr size_t kFrontierCap = 10000;

template <typename T>
const T& sample_of(const std::vector<T>& v, std::mt19937_64& rng) {
  std::uniform_int_distribution<size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

inline std::set<NodeId> capped_denotation(const KnowledgeGraph& kg, const ProgramPtr& p,
                                          std::mt19937_64& rng) {
  std::set<NodeId> s = execute(kg, p).nodes;
  if (s.size() <= kFrontierCap) return s;
  std::vector<NodeId> all(s.begin(), s.end());
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(kFrontierCap);
  return std::set<NodeId>(all.begin(), all.end());
}

// Forward relations out of `frontier` whose objects include literals, with one
// observed literal each (for superlative/comparative construction).
inline std::map<std::string, std::vector<NodeId>> literal_relations(
    const KnowledgeGraph& kg, const std::set<NodeId>& frontier) {
  std::map<std::string, std::vector<NodeId>> out;
  for (const auto& n : frontier) {
    if (n.is_literal) continue;
    auto it = kg.fwd.find(n.id);
    if (it == kg.fwd.end()) continue;
    for (const auto& [r, objs] : it->second) {
      for (const auto& o : objs)
        if (o.is_literal) out[r].push_back(o);
    }
  }
  return out;
}

// The deepest ClassRef (depth through any operator); the walk's seed class.
inline const Program* topic_class(const ProgramPtr& p, int depth, int& best_depth,
                                  const Program*& best) {
  if (p->kind == NodeKind::Class && depth > best_depth) {
    best_depth = depth;
    best = p.get();
  }
  if (p->child) topic_class(p->child, depth + 1, best_depth, best);
  if (p->right) topic_class(p->right, depth + 1, best_depth, best);
  return best;
}

inline ProgramPtr substitute(const ProgramPtr& p, const Program* target, const ProgramPtr& repl) {
  if (p.get() == target) return repl;
  if (!p->child && !p->right) return p;
  auto q = std::make_shared<Program>(*p);
  if (p->child) q->child = substitute(p->child, target, repl);
  if (p->right) q->right = substitute(p->right, target, repl);
  return q;
}

}  // namespace detail

// One random walk: seed class, Join/And extensions to a sampled target
// complexity, optional program function, answer-class wrap. Returns the
// ungrounded program, or null on a dead end.
inline ProgramPtr walk_one(const KnowledgeGraph& kg, const ExplorationConfig& cfg,
                           std::mt19937_64& rng) {
  std::vector<std::string> seed_classes;
  for (const auto& [c, insts] : kg.class_instances)
    if (!insts.empty()) seed_classes.push_back(c);
  if (seed_classes.empty()) return nullptr;

  std::discrete_distribution<int> hop_dist(cfg.hop_weights.begin(), cfg.hop_weights.end());
  int target = hop_dist(rng) + 1;

  ProgramPtr p = Program::cls(detail::sample_of(seed_classes, rng));
  int max_steps = 4 * target + 4;  // class extensions do not add hops; bound the loop
  for (int step = 0; complexity(p) < target; ++step) {
    if (step >= max_steps) return nullptr;
    std::set<NodeId> frontier = detail::capped_denotation(kg, p, rng);
    if (frontier.empty()) return nullptr;
    std::vector<SchemaRef> options;
    for (const auto& s : kg.reachable_schema(frontier)) options.push_back(s);
    if (options.empty()) return nullptr;
    const SchemaRef& pick = detail::sample_of(options, rng);
    if (pick.kind == SchemaKind::Class) {
      // avoid stacking the same class constraint
      if (p->kind == NodeKind::Class && p->id == pick.id) continue;
      p = Program::conj(Program::cls(pick.id), p);
    } else if (pick.reverse) {
      // frontier nodes are objects of r; step to the subjects
      p = Program::join(pick.id, p, false);
    } else {
      // frontier nodes are subjects of r; step to the objects
      p = Program::join(pick.id, p, true);
    }
  }

  std::set<NodeId> result = detail::capped_denotation(kg, p, rng);
  if (result.empty()) return nullptr;

  // name the answer set when its elements carry a class
  std::set<std::string> result_classes;
  for (const auto& n : result)
    if (!n.is_literal)
      for (const auto& c : kg.classes_of(n.id)) result_classes.insert(c);
  if (!result_classes.empty()) {
    std::vector<std::string> cs(result_classes.begin(), result_classes.end());
    p = Program::conj(Program::cls(detail::sample_of(cs, rng)), p);
  }

  if (!cfg.function_set.empty() && cfg.function_probability > 0.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < cfg.function_probability) {
      std::vector<std::string> fs(cfg.function_set.begin(), cfg.function_set.end());
      const std::string& f = detail::sample_of(fs, rng);
      if (f == "COUNT") {
        p = Program::count(p);
      } else {
        auto lit_rels = detail::literal_relations(kg, result);
        if (!lit_rels.empty()) {  // else skip the function step
          std::vector<std::string> rels;
          for (const auto& [r, _] : lit_rels) rels.push_back(r);
          const std::string& r = detail::sample_of(rels, rng);
          if (f == "ARGMAX" || f == "ARGMIN") {
            p = Program::arg_extreme(f == "ARGMAX" ? NodeKind::ArgMax : NodeKind::ArgMin, p, r);
          } else {
            const NodeId& pivot = detail::sample_of(lit_rels.at(r), rng);
            CmpOp op = f == "le" ? CmpOp::Le : f == "lt" ? CmpOp::Lt
                       : f == "ge" ? CmpOp::Ge : CmpOp::Gt;
            p = Program::conj(p, Program::compare(op, r, pivot.id, pivot.lit_type));
          }
        }
      }
    }
  }
  return p;
}

// Substitute instances of the topic class (deepest ClassRef) until the program
// executes non-empty.
inline ProgramPtr ground(const KnowledgeGraph& kg, const ProgramPtr& ungrounded, int attempts,
                         std::mt19937_64& rng) {
  int best_depth = -1;
  const Program* topic = nullptr;
  detail::topic_class(ungrounded, 0, best_depth, topic);
  if (!topic) return nullptr;

  std::vector<std::string> instances = kg.instances_of(topic->id);
  std::shuffle(instances.begin(), instances.end(), rng);
  if (instances.size() > size_t(std::max(0, attempts))) instances.resize(std::max(0, attempts));
  for (const auto& inst : instances) {
    // machine ids print bare and re-parse as entities; anything else needs quotes
    ProgramPtr candidate = detail::substitute(
        ungrounded, topic, Program::entity(inst, !detail::looks_like_entity_id(inst)));
    if (execute_nonempty(kg, candidate)) return candidate;
  }
  return nullptr;
}

inline ExplorationResult explore(const KnowledgeGraph& kg, const ExplorationConfig& cfg) {
  cfg.validate();
  auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(cfg.rng_seed);
  ExplorationResult res;
  std::set<std::string> seen_programs;

  while (long(res.programs.size()) < cfg.budget && res.walks_attempted < cfg.retry_limit()) {
    ++res.walks_attempted;
    ProgramPtr walked = walk_one(kg, cfg, rng);
    if (!walked) {
      ++res.walks_rejected;
      continue;
    }
    if (res.pattern_counts[pattern_of(walked, &kg)] >= cfg.per_pattern_cap) {
      ++res.walks_rejected;
      continue;
    }
    ProgramPtr grounded = ground(kg, walked, cfg.grounding_attempts, rng);
    if (!grounded) {
      ++res.groundings_failed;
      continue;
    }
    std::string pattern = pattern_of(grounded, &kg);
    if (res.pattern_counts[pattern] >= cfg.per_pattern_cap) {
      ++res.walks_rejected;
      continue;
    }
    if (!seen_programs.insert(print(grounded)).second) {
      ++res.walks_rejected;
      continue;
    }
    ++res.pattern_counts[pattern];
    res.programs.push_back(grounded);
  }

  std::sort(res.programs.begin(), res.programs.end(),
            [](const ProgramPtr& a, const ProgramPtr& b) { return print(a) < print(b); });
  res.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

// Corpus statistics table; relation counts include reverse variants.
struct ExplorationStats {
  long programs = 0;
  long hops[4] = {0, 0, 0, 0};
  long relations = 0;
  long classes = 0;
  long patterns = 0;
  long subexprs = 0;
  double elapsed_seconds = 0.0;

  std::vector<std::pair<std::string, std::string>> rows() const {
    auto n = [](double v) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.2f", v);
      return std::string(buf);
    };
    return {{"Programs", std::to_string(programs)},
            {"1-hop", std::to_string(hops[0])},
            {"2-hop", std::to_string(hops[1])},
            {"3-hop", std::to_string(hops[2])},
            {"4-hop", std::to_string(hops[3])},
            {"Relations", std::to_string(relations)},
            {"Classes", std::to_string(classes)},
            {"Patterns", std::to_string(patterns)},
            {"Sub-expressions", std::to_string(subexprs)},
            {"Time (s)", n(elapsed_seconds)}};
  }
};

namespace detail {

inline void collect_relation_refs(const ProgramPtr& p, std::set<std::string>& rels,
                                  std::set<std::string>& classes) {
  switch (p->kind) {
    case NodeKind::Class: classes.insert(p->id); break;
    case NodeKind::Join: rels.insert(p->reverse ? "(R " + p->id + ")" : p->id); break;
    case NodeKind::ArgMax:
    case NodeKind::ArgMin:
    case NodeKind::Cmp: rels.insert(p->relation); break;
    default: break;
  }
  if (p->child) collect_relation_refs(p->child, rels, classes);
  if (p->right) collect_relation_refs(p->right, rels, classes);
}

}  // namespace detail

inline ExplorationStats stats(const ExplorationResult& res, const KnowledgeGraph* kg = nullptr) {
  ExplorationStats s;
  s.programs = long(res.programs.size());
  s.elapsed_seconds = res.elapsed_seconds;
  std::set<std::string> rels, classes, patterns, subs;
  for (const auto& p : res.programs) {
    int c = complexity(p);
    if (c >= 1 && c <= 4) ++s.hops[c - 1];
    detail::collect_relation_refs(p, rels, classes);
    patterns.insert(pattern_of(p, kg));
    for (const auto& sub : subexpressions(p)) subs.insert(sub);
  }
  s.relations = long(rels.size());
  s.classes = long(classes.size());
  s.patterns = long(patterns.size());
  s.subexprs = long(subs.size());
  return s;
}

}  // namespace kgqa
