#pragma once

// Independent brute-force executor and program enumerator used to check the
// production evaluator. Works directly off the triple list with set
// comprehensions; shares no code with the indexed evaluator.

#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "kgqa/executor.hpp"
#include "kgqa/kg.hpp"
#include "kgqa/program.hpp"

namespace kgqa::test {

struct OracleOutcome {
  bool error = false;
  bool is_count = false;
  long count = 0;
  std::set<NodeId> nodes;

  bool operator==(const OracleOutcome& o) const {
    if (error != o.error) return false;
    if (error) return true;  // any error matches any error
    if (is_count != o.is_count) return false;
    return is_count ? count == o.count : nodes == o.nodes;
  }
};

namespace oracle_detail {

inline std::optional<double> as_number(const NodeId& n) {
  if (!n.is_literal) return std::nullopt;
  if (n.lit_type != LiteralType::Int && n.lit_type != LiteralType::Float) return std::nullopt;
  return std::stod(n.id);
}

// -1/0/1, nullopt on incomparable types.
inline std::optional<int> cmp(const NodeId& a, const NodeId& b) {
  auto x = as_number(a), y = as_number(b);
  if (x && y) return *x < *y ? -1 : (*x > *y ? 1 : 0);
  if (!a.is_literal || !b.is_literal || a.lit_type != b.lit_type) return std::nullopt;
  int c = a.id.compare(b.id);
  return c < 0 ? -1 : (c > 0 ? 1 : 0);
}

struct Fail {};

inline std::set<NodeId> eval_set(const KnowledgeGraph& kg, const ProgramPtr& p) {
  const auto& ts = kg.triples;
  switch (p->kind) {
    case NodeKind::Entity: {
      std::string id = p->id;
      if (!kg.entities.count(id)) {
        auto r = kg.resolve_entity(id);
        if (!r) return {};
        id = *r;
      }
      return {NodeId::entity(id)};
    }
    case NodeKind::Literal:
      return {NodeId::literal(p->id, p->lit_type)};
    case NodeKind::Class: {
      if (!kg.has_class(p->id)) throw Fail{};
      std::set<NodeId> out;
      for (const auto& t : ts)
        if (t.predicate == kg.type_predicate && !t.object.is_literal && t.object.id == p->id)
          out.insert(NodeId::entity(t.subject));
      return out;
    }
    case NodeKind::Join: {
      if (!kg.has_relation(p->id)) throw Fail{};
      std::set<NodeId> child = eval_set(kg, p->child);
      std::set<NodeId> out;
      for (const auto& t : ts) {
        if (t.predicate != p->id) continue;
        if (!p->reverse) {
          if (child.count(t.object)) out.insert(NodeId::entity(t.subject));
        } else {
          if (child.count(NodeId::entity(t.subject))) out.insert(t.object);
        }
      }
      return out;
    }
    case NodeKind::And: {
      std::set<NodeId> a = eval_set(kg, p->child), b = eval_set(kg, p->right), out;
      for (const auto& n : a)
        if (b.count(n)) out.insert(n);
      return out;
    }
    case NodeKind::Cmp: {
      if (!kg.has_relation(p->relation)) throw Fail{};
      NodeId pivot = NodeId::literal(p->id, p->lit_type);
      std::set<NodeId> out;
      for (const auto& t : ts) {
        if (t.predicate != p->relation || !t.object.is_literal) continue;
        auto c = cmp(t.object, pivot);
        if (!c) throw Fail{};
        bool keep = p->cmp == CmpOp::Le   ? *c <= 0
                    : p->cmp == CmpOp::Lt ? *c < 0
                    : p->cmp == CmpOp::Ge ? *c >= 0
                                          : *c > 0;
        if (keep) out.insert(NodeId::entity(t.subject));
      }
      return out;
    }
    case NodeKind::ArgMax:
    case NodeKind::ArgMin: {
      if (!kg.has_relation(p->relation)) throw Fail{};
      std::set<NodeId> base = eval_set(kg, p->child);
      std::vector<std::pair<NodeId, NodeId>> pairs;  // (element, value)
      for (const auto& t : ts) {
        if (t.predicate != p->relation || !t.object.is_literal) continue;
        if (base.count(NodeId::entity(t.subject))) pairs.push_back({NodeId::entity(t.subject), t.object});
      }
      if (pairs.empty()) {
        if (base.empty()) return {};
        throw Fail{};
      }
      NodeId best = pairs.front().second;
      for (const auto& [_, v] : pairs) {
        auto c = cmp(v, best);
        if (!c) throw Fail{};
        if ((p->kind == NodeKind::ArgMax && *c > 0) || (p->kind == NodeKind::ArgMin && *c < 0))
          best = v;
      }
      std::set<NodeId> out;
      for (const auto& [e, v] : pairs) {
        auto c = cmp(v, best);
        if (!c) throw Fail{};
        if (*c == 0) out.insert(e);
      }
      return out;
    }
    default:
      throw Fail{};
  }
}

}  // namespace oracle_detail

inline OracleOutcome oracle_execute(const KnowledgeGraph& kg, const ProgramPtr& p) {
  OracleOutcome out;
  try {
    if (p->kind == NodeKind::Count) {
      out.is_count = true;
      out.count = long(oracle_detail::eval_set(kg, p->child).size());
    } else {
      out.nodes = oracle_detail::eval_set(kg, p);
    }
  } catch (const oracle_detail::Fail&) {
    out.error = true;
  }
  return out;
}

inline OracleOutcome production_execute(const KnowledgeGraph& kg, const ProgramPtr& p) {
  OracleOutcome out;
  try {
    AnswerSet a = execute(kg, p);
    out.is_count = a.is_count;
    out.count = a.count;
    out.nodes = a.nodes;
  } catch (const ExecError&) {
    out.error = true;
  }
  return out;
}

// All programs of complexity <= 2 over the graph's vocabulary: leaves, joins
// over smaller programs, conjunctions with leaf right operand, plus function
// roots. Deduplicated by canonical string.
inline std::vector<ProgramPtr> enumerate_programs(const KnowledgeGraph& kg) {
  std::vector<ProgramPtr> leaves;
  for (const auto& e : kg.entities) leaves.push_back(Program::entity(e, false));
  std::vector<std::string> rels, classes;
  for (const auto& [id, item] : kg.schema) {
    if (item.kind == SchemaKind::Class) {
      classes.push_back(id);
      leaves.push_back(Program::cls(id));
    } else {
      rels.push_back(id);
    }
  }
  std::set<std::string> lit_seen;
  std::vector<NodeId> literals;
  for (const auto& t : kg.triples) {
    if (t.object.is_literal && lit_seen.insert(t.object.id + "^^" +
                                               literal_type_name(t.object.lit_type)).second) {
      literals.push_back(t.object);
      leaves.push_back(Program::literal(t.object.id, t.object.lit_type));
    }
  }

  std::vector<ProgramPtr> out;
  std::set<std::string> seen;
  auto add = [&](const ProgramPtr& p) {
    if (complexity(p) > 2) return false;
    if (!seen.insert(print(p)).second) return false;
    out.push_back(p);
    return true;
  };
  for (const auto& l : leaves) add(l);

  // one layer of joins over leaves, conjunctions leaf x leaf
  std::vector<ProgramPtr> level1;
  for (const auto& r : rels)
    for (const auto& l : leaves)
      for (bool rev : {false, true}) {
        auto p = Program::join(r, l, rev);
        if (add(p)) level1.push_back(p);
      }
  for (const auto& a : leaves)
    for (const auto& b : leaves)
      if (print(a) != print(b)) {
        auto p = Program::conj(a, b);
        if (add(p)) level1.push_back(p);
      }

  // second layer: joins over level1, conjunctions level1 x leaf
  std::vector<ProgramPtr> level2;
  for (const auto& r : rels)
    for (const auto& c : level1)
      for (bool rev : {false, true}) {
        auto p = Program::join(r, c, rev);
        if (add(p)) level2.push_back(p);
      }
  for (const auto& c : level1)
    for (const auto& b : leaves) {
      auto p = Program::conj(c, b);
      if (add(p)) level2.push_back(p);
    }

  // function roots over everything enumerated so far
  std::vector<ProgramPtr> sets = out;
  for (const auto& s : sets) {
    add(Program::count(s));
    for (const auto& r : rels) {
      add(Program::arg_extreme(NodeKind::ArgMax, s, r));
      add(Program::arg_extreme(NodeKind::ArgMin, s, r));
    }
  }
  for (const auto& r : rels)
    for (const auto& v : literals)
      for (CmpOp op : {CmpOp::Le, CmpOp::Lt, CmpOp::Ge, CmpOp::Gt})
        add(Program::compare(op, r, v.id, v.lit_type));
  return out;
}

// Seeded random small graph: a few classes, relations (one literal-valued),
// and ~50 triples.
inline KnowledgeGraph random_graph(uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::ostringstream schema, triples;
  schema << "type\trelation\tinstance of\n";
  int n_classes = 2 + int(rng() % 2);
  int n_rels = 3;
  int n_entities = 8;
  for (int c = 0; c < n_classes; ++c) schema << "c" << c << "\tclass\tclass " << c << "\n";
  for (int r = 0; r < n_rels; ++r) schema << "r" << r << "\trelation\trelation " << r << "\n";
  schema << "rlit\trelation\tvalue\n";

  for (int e = 0; e < n_entities; ++e)
    triples << "e" << e << "\ttype\tc" << (rng() % n_classes) << "\n";
  for (int i = 0; i < 40; ++i) {
    int s = int(rng() % n_entities), o = int(rng() % n_entities);
    triples << "e" << s << "\tr" << (rng() % n_rels) << "\te" << o << "\n";
  }
  for (int i = 0; i < 10; ++i) {
    int s = int(rng() % n_entities);
    triples << "e" << s << "\trlit\t" << (1990 + int(rng() % 40)) << "^^int\n";
  }
  std::istringstream ts(triples.str()), ss(schema.str());
  return load_graph(ts, ss);
}

}  // namespace kgqa::test
