#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "kgqa/kg.hpp"
#include "kgqa/program.hpp"

namespace kgqa {

struct ExecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Either a set of entities/literals or a COUNT result.
struct AnswerSet {
  bool is_count = false;
  long count = 0;
  std::set<NodeId> nodes;

  bool empty() const { return is_count ? count == 0 : nodes.empty(); }

  // String forms used for metric comparison: entity ids, bare literal values,
  // counts as their decimal form.
  std::set<std::string> as_strings() const {
    std::set<std::string> out;
    if (is_count) {
      out.insert(std::to_string(count));
      return out;
    }
    for (const auto& n : nodes) out.insert(n.id);
    return out;
  }

  bool operator==(const AnswerSet& o) const {
    if (is_count != o.is_count) return false;
    return is_count ? count == o.count : nodes == o.nodes;
  }
};

struct Diagnostic {
  std::string message;
};

inline std::vector<Diagnostic> validate(const KnowledgeGraph& kg, const ProgramPtr& p) {
  std::vector<Diagnostic> out;
  std::function<void(const ProgramPtr&)> walk = [&](const ProgramPtr& n) {
    switch (n->kind) {
      case NodeKind::Class:
        if (!kg.has_class(n->id)) out.push_back({"unknown class: " + n->id});
        break;
      case NodeKind::Entity:
        if (!kg.resolve_entity(n->id)) out.push_back({"unknown entity: " + n->id});
        break;
      case NodeKind::Join:
        if (!kg.has_relation(n->id)) out.push_back({"unknown relation: " + n->id});
        break;
      case NodeKind::ArgMax:
      case NodeKind::ArgMin:
        if (!kg.has_relation(n->relation)) out.push_back({"unknown relation: " + n->relation});
        break;
      case NodeKind::Cmp: {
        auto it = kg.schema.find(n->relation);
        if (it == kg.schema.end() || it->second.kind != SchemaKind::Relation) {
          out.push_back({"unknown relation: " + n->relation});
        } else if (!it->second.range.empty()) {
          auto rt = literal_type_from(it->second.range);
          if (rt && *rt != n->lit_type) {
            out.push_back({"literal type mismatch for " + n->relation + ": expected " +
                           it->second.range + ", got " + literal_type_name(n->lit_type)});
          }
        }
        break;
      }
      default:
        break;
    }
    if (n->child) walk(n->child);
    if (n->right) walk(n->right);
  };
  walk(p);
  return out;
}

namespace detail {

class Evaluator {
 public:
  explicit Evaluator(const KnowledgeGraph& kg) : kg_(kg) {}

  std::set<NodeId> eval_set(const ProgramPtr& p) {
    std::string key = print(p);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    std::set<NodeId> out = eval_uncached(p);
    memo_.emplace(std::move(key), out);
    return out;
  }

 private:
  std::set<NodeId> eval_uncached(const ProgramPtr& p) {
    switch (p->kind) {
      case NodeKind::Entity: {
        auto id = kg_.resolve_entity(p->id);
        if (!id) return {};
        return {NodeId::entity(*id)};
      }
      case NodeKind::Literal:
        return {NodeId::literal(p->id, p->lit_type)};
      case NodeKind::Class: {
        if (!kg_.has_class(p->id)) throw ExecError("unknown class: " + p->id);
        std::set<NodeId> out;
        for (const auto& e : kg_.instances_of(p->id)) out.insert(NodeId::entity(e));
        return out;
      }
      case NodeKind::Join: {
        if (!kg_.has_relation(p->id)) throw ExecError("unknown relation: " + p->id);
        std::set<NodeId> child = eval_set(p->child);
        std::set<NodeId> out;
        if (!p->reverse) {
          // {x : exists y in child, (x, r, y)}
          for (const auto& y : child) {
            auto it = kg_.rev.find(y);
            if (it == kg_.rev.end()) continue;
            auto rit = it->second.find(p->id);
            if (rit == it->second.end()) continue;
            for (const auto& s : rit->second) out.insert(NodeId::entity(s));
          }
        } else {
          // {x : exists y in child, (y, r, x)}
          for (const auto& y : child) {
            if (y.is_literal) continue;
            auto it = kg_.fwd.find(y.id);
            if (it == kg_.fwd.end()) continue;
            auto rit = it->second.find(p->id);
            if (rit == it->second.end()) continue;
            for (const auto& o : rit->second) out.insert(o);
          }
        }
        return out;
      }
      case NodeKind::And: {
        std::set<NodeId> a = eval_set(p->child);
        std::set<NodeId> b = eval_set(p->right);
        std::set<NodeId> out;
        for (const auto& n : a)
          if (b.count(n)) out.insert(n);
        return out;
      }
      case NodeKind::Cmp: {
        if (!kg_.has_relation(p->relation)) throw ExecError("unknown relation: " + p->relation);
        NodeId pivot = NodeId::literal(p->id, p->lit_type);
        std::set<NodeId> out;
        for (const auto& t : kg_.triples) {
          if (t.predicate != p->relation || !t.object.is_literal) continue;
          auto c = compare_literals(t.object, pivot);
          if (!c) throw ExecError("cross-type literal comparison on " + p->relation);
          bool keep = false;
          switch (p->cmp) {
            case CmpOp::Le: keep = *c <= 0; break;
            case CmpOp::Lt: keep = *c < 0; break;
            case CmpOp::Ge: keep = *c >= 0; break;
            case CmpOp::Gt: keep = *c > 0; break;
          }
          if (keep) out.insert(NodeId::entity(t.subject));
        }
        return out;
      }
      case NodeKind::ArgMax:
      case NodeKind::ArgMin: {
        if (!kg_.has_relation(p->relation)) throw ExecError("unknown relation: " + p->relation);
        std::set<NodeId> base = eval_set(p->child);
        bool want_max = p->kind == NodeKind::ArgMax;
        std::optional<NodeId> best;
        std::map<NodeId, std::vector<NodeId>> values;  // element -> its literal values
        for (const auto& x : base) {
          if (x.is_literal) continue;
          auto it = kg_.fwd.find(x.id);
          if (it == kg_.fwd.end()) continue;
          auto rit = it->second.find(p->relation);
          if (rit == it->second.end()) continue;
          for (const auto& v : rit->second) {
            if (!v.is_literal) continue;
            values[x].push_back(v);
            if (!best) {
              best = v;
            } else {
              auto c = compare_literals(v, *best);
              if (!c) throw ExecError("cross-type literal comparison on " + p->relation);
              if ((want_max && *c > 0) || (!want_max && *c < 0)) best = v;
            }
          }
        }
        // elements lacking any value are skipped; error only if all lack values
        if (!best) {
          if (base.empty()) return {};
          throw ExecError("no " + p->relation + " values in argmax/argmin operand");
        }
        std::set<NodeId> out;
        for (const auto& [x, vs] : values) {
          for (const auto& v : vs) {
            if (compare_literals(v, *best) == 0) {
              out.insert(x);
              break;
            }
          }
        }
        return out;
      }
      default:
        throw ExecError("COUNT is only allowed at the program root");
    }
  }

  const KnowledgeGraph& kg_;
  std::map<std::string, std::set<NodeId>> memo_;
};

}  // namespace detail

inline AnswerSet execute(const KnowledgeGraph& kg, const ProgramPtr& p) {
  detail::Evaluator ev(kg);
  AnswerSet out;
  if (p->kind == NodeKind::Count) {
    out.is_count = true;
    out.count = static_cast<long>(ev.eval_set(p->child).size());
  } else {
    out.nodes = ev.eval_set(p);
  }
  return out;
}

inline bool execute_nonempty(const KnowledgeGraph& kg, const ProgramPtr& p) {
  return !execute(kg, p).empty();
}

}  // namespace kgqa
