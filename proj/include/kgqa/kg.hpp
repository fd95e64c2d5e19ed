#pragma once

#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kgqa/text.hpp"

namespace kgqa {

enum class LiteralType { Int, Float, Date, String };

inline std::string literal_type_name(LiteralType t) {
  switch (t) {
    case LiteralType::Int: return "int";
    case LiteralType::Float: return "float";
    case LiteralType::Date: return "date";
    case LiteralType::String: return "string";
  }
  return "string";
}

inline std::optional<LiteralType> literal_type_from(const std::string& s) {
  if (s == "int") return LiteralType::Int;
  if (s == "float") return LiteralType::Float;
  if (s == "date") return LiteralType::Date;
  if (s == "string") return LiteralType::String;
  return std::nullopt;
}

// A graph node: either an entity id or a typed literal value.
struct NodeId {
  std::string id;  // entity id, or the literal's lexical form
  bool is_literal = false;
  LiteralType lit_type = LiteralType::String;

  static NodeId entity(std::string id) { return {std::move(id), false, LiteralType::String}; }
  static NodeId literal(std::string value, LiteralType t) { return {std::move(value), true, t}; }

  auto key() const { return std::tie(is_literal, id, lit_type); }
  bool operator==(const NodeId& o) const { return key() == o.key(); }
  bool operator<(const NodeId& o) const { return key() < o.key(); }
};

// Numeric literals compare by value, dates/strings lexically.
// Cross-type comparison (beyond int/float) is an error, signalled by nullopt.
inline std::optional<int> compare_literals(const NodeId& a, const NodeId& b) {
  if (!a.is_literal || !b.is_literal) return std::nullopt;
  auto numeric = [](LiteralType t) { return t == LiteralType::Int || t == LiteralType::Float; };
  if (numeric(a.lit_type) && numeric(b.lit_type)) {
    double x = std::stod(a.id), y = std::stod(b.id);
    return x < y ? -1 : (x > y ? 1 : 0);
  }
  if (a.lit_type != b.lit_type) return std::nullopt;
  int c = a.id.compare(b.id);
  return c < 0 ? -1 : (c > 0 ? 1 : 0);
}

enum class SchemaKind { Relation, Class };

struct SchemaItem {
  std::string id;
  SchemaKind kind = SchemaKind::Relation;
  std::string description;  // empty means: derive from id
  std::string domain;       // relations only, optional
  std::string range;        // relations only, optional class id or literal type tag

  std::string text() const {
    if (!description.empty()) return description;
    std::string t = id;
    for (char& c : t)
      if (c == '.' || c == '_') c = ' ';
    return t;
  }
};

// A schema item as seen from a node frontier; relations reached through
// their object side carry the reverse marker.
struct SchemaRef {
  std::string id;
  SchemaKind kind = SchemaKind::Relation;
  bool reverse = false;

  auto key() const { return std::tie(id, kind, reverse); }
  bool operator==(const SchemaRef& o) const { return key() == o.key(); }
  bool operator<(const SchemaRef& o) const { return key() < o.key(); }
};

struct Triple {
  std::string subject;
  std::string predicate;
  NodeId object;

  auto key() const { return std::tie(subject, predicate, object); }
  bool operator<(const Triple& o) const { return key() < o.key(); }
  bool operator==(const Triple& o) const { return key() == o.key(); }
};

// Immutable after load; all members are read-only thereafter.
class KnowledgeGraph {
 public:
  std::string type_predicate = "type";

  std::vector<Triple> triples;
  std::map<std::string, SchemaItem> schema;
  std::map<std::string, std::map<std::string, std::vector<NodeId>>> fwd;   // subj -> rel -> objs
  std::map<NodeId, std::map<std::string, std::vector<std::string>>> rev;   // obj -> rel -> subjs
  std::map<std::string, std::vector<std::string>> class_instances;         // class -> entities
  std::map<std::string, std::vector<std::string>> entity_classes;          // entity -> classes (sorted)
  std::set<std::string> entities;
  std::map<std::string, std::string> labels;                 // entity -> label
  std::map<std::string, std::vector<std::string>> by_label;  // lowercased label/alias -> entities

  bool has_relation(const std::string& id) const {
    auto it = schema.find(id);
    return it != schema.end() && it->second.kind == SchemaKind::Relation;
  }
  bool has_class(const std::string& id) const {
    auto it = schema.find(id);
    return it != schema.end() && it->second.kind == SchemaKind::Class;
  }
  bool has_entity(const std::string& id) const { return entities.count(id) > 0; }

  const std::vector<std::string>& instances_of(const std::string& class_id) const {
    if (!has_class(class_id)) throw std::runtime_error("unknown class: " + class_id);
    static const std::vector<std::string> kEmpty;
    auto it = class_instances.find(class_id);
    return it == class_instances.end() ? kEmpty : it->second;
  }

  const std::vector<std::string>& classes_of(const std::string& entity_id) const {
    static const std::vector<std::string> kEmpty;
    auto it = entity_classes.find(entity_id);
    return it == entity_classes.end() ? kEmpty : it->second;
  }

  std::string label_of(const std::string& entity_id) const {
    auto it = labels.find(entity_id);
    return it == labels.end() ? entity_id : it->second;
  }

  // Entity id, quoted entity label, or alias -> entity id.
  std::optional<std::string> resolve_entity(const std::string& ref) const {
    if (entities.count(ref)) return ref;
    auto it = by_label.find(lowercase(ref));
    if (it != by_label.end() && !it->second.empty()) return it->second.front();
    return std::nullopt;
  }

  enum class Direction { Forward, Reverse };

  // Non-type edges incident to `nodes`: forward yields (r, object),
  // reverse yields (r, subject).
  std::set<std::pair<std::string, NodeId>> neighbors(const std::set<NodeId>& nodes,
                                                     Direction dir) const {
    std::set<std::pair<std::string, NodeId>> out;
    for (const auto& n : nodes) {
      if (dir == Direction::Forward) {
        if (n.is_literal) continue;
        auto it = fwd.find(n.id);
        if (it == fwd.end()) continue;
        for (const auto& [r, objs] : it->second) {
          if (r == type_predicate) continue;
          for (const auto& o : objs) out.insert({r, o});
        }
      } else {
        auto it = rev.find(n);
        if (it == rev.end()) continue;
        for (const auto& [r, subjs] : it->second) {
          if (r == type_predicate) continue;
          for (const auto& s : subjs) out.insert({r, NodeId::entity(s)});
        }
      }
    }
    return out;
  }

  // Relations incident to the frontier (reverse-incident ones marked) plus
  // the classes of frontier nodes.
  std::set<SchemaRef> reachable_schema(const std::set<NodeId>& frontier) const {
    std::set<SchemaRef> out;
    for (const auto& n : frontier) {
      if (!n.is_literal) {
        auto it = fwd.find(n.id);
        if (it != fwd.end()) {
          for (const auto& [r, _] : it->second) {
            if (r == type_predicate) continue;
            out.insert({r, SchemaKind::Relation, false});
          }
        }
        for (const auto& c : classes_of(n.id)) out.insert({c, SchemaKind::Class, false});
      }
      auto rit = rev.find(n);
      if (rit != rev.end()) {
        for (const auto& [r, _] : rit->second) {
          if (r == type_predicate) continue;
          out.insert({r, SchemaKind::Relation, true});
        }
      }
    }
    return out;
  }

  // "id=description; ..." in input order, as used by the prompt schema block.
  std::string describe(const std::vector<std::string>& item_ids) const {
    std::vector<std::string> parts;
    for (const auto& id : item_ids) {
      auto it = schema.find(id);
      if (it == schema.end()) throw std::runtime_error("unknown schema item: " + id);
      parts.push_back(id + "=" + it->second.text());
    }
    return join(parts, "; ");
  }
};

namespace detail {

inline NodeId parse_object(const std::string& tok, size_t line_no) {
  size_t pos = tok.rfind("^^");
  if (pos != std::string::npos) {
    auto t = literal_type_from(tok.substr(pos + 2));
    if (!t) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": unknown literal type tag in '" + tok + "'");
    }
    std::string value = tok.substr(0, pos);
    if (*t == LiteralType::Int || *t == LiteralType::Float) {
      try {
        size_t used = 0;
        std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
      } catch (const std::exception&) {
        throw std::runtime_error("line " + std::to_string(line_no) +
                                 ": literal '" + value + "' does not parse as " +
                                 literal_type_name(*t));
      }
    }
    return NodeId::literal(value, *t);
  }
  return NodeId::entity(tok);
}

}  // namespace detail

// TSV loaders. Triples: subject \t predicate \t object (literals as value^^tag).
// Schema: id \t kind \t description [\t domain [\t range]].
// Labels: entity \t label \t alias1|alias2|...
inline KnowledgeGraph load_graph(std::istream& triples_src, std::istream& schema_src,
                                 std::istream* labels_src = nullptr,
                                 const std::string& type_predicate = "type") {
  KnowledgeGraph kg;
  kg.type_predicate = type_predicate;

  std::string line;
  size_t line_no = 0;
  while (std::getline(schema_src, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto cols = split_on(line, '\t');
    if (cols.size() < 2)
      throw std::runtime_error("schema line " + std::to_string(line_no) + ": expected id\\tkind");
    SchemaItem item;
    item.id = cols[0];
    if (cols[1] == "relation") item.kind = SchemaKind::Relation;
    else if (cols[1] == "class") item.kind = SchemaKind::Class;
    else
      throw std::runtime_error("schema line " + std::to_string(line_no) + ": bad kind '" +
                               cols[1] + "'");
    if (cols.size() > 2) item.description = cols[2];
    if (cols.size() > 3) item.domain = cols[3];
    if (cols.size() > 4) item.range = cols[4];
    if (kg.schema.count(item.id))
      throw std::runtime_error("schema line " + std::to_string(line_no) + ": duplicate id '" +
                               item.id + "'");
    kg.schema[item.id] = item;
  }

  std::set<Triple> seen;
  line_no = 0;
  while (std::getline(triples_src, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto cols = split_on(line, '\t');
    if (cols.size() != 3)
      throw std::runtime_error("triples line " + std::to_string(line_no) +
                               ": expected 3 tab-separated columns");
    Triple t;
    t.subject = cols[0];
    t.predicate = cols[1];
    if (!kg.has_relation(t.predicate))
      throw std::runtime_error("triples line " + std::to_string(line_no) +
                               ": predicate not in schema: " + t.predicate);
    t.object = detail::parse_object(cols[2], line_no);
    if (!seen.insert(t).second) continue;  // dedup

    kg.entities.insert(t.subject);
    if (t.predicate == kg.type_predicate) {
      if (t.object.is_literal)
        throw std::runtime_error("triples line " + std::to_string(line_no) +
                                 ": class assertion with literal object");
      if (!kg.has_class(t.object.id))
        throw std::runtime_error("triples line " + std::to_string(line_no) +
                                 ": unknown class: " + t.object.id);
      kg.class_instances[t.object.id].push_back(t.subject);
      kg.entity_classes[t.subject].push_back(t.object.id);
    } else if (!t.object.is_literal) {
      kg.entities.insert(t.object.id);
    }
    kg.fwd[t.subject][t.predicate].push_back(t.object);
    kg.rev[t.object][t.predicate].push_back(t.subject);
    kg.triples.push_back(t);
  }
  for (auto& [_, v] : kg.class_instances) std::sort(v.begin(), v.end());
  for (auto& [_, v] : kg.entity_classes) std::sort(v.begin(), v.end());

  if (labels_src) {
    line_no = 0;
    while (std::getline(*labels_src, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      auto cols = split_on(line, '\t');
      if (cols.size() < 2)
        throw std::runtime_error("labels line " + std::to_string(line_no) +
                                 ": expected entity\\tlabel");
      kg.labels[cols[0]] = cols[1];
      kg.by_label[lowercase(cols[1])].push_back(cols[0]);
      if (cols.size() > 2 && !cols[2].empty()) {
        for (const auto& alias : split_on(cols[2], '|'))
          if (!alias.empty()) kg.by_label[lowercase(alias)].push_back(cols[0]);
      }
    }
  }
  return kg;
}

}  // namespace kgqa
