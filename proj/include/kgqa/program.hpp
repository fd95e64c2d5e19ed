#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "kgqa/kg.hpp"

namespace kgqa {

enum class NodeKind { Entity, Literal, Class, Join, And, Count, ArgMax, ArgMin, Cmp };
enum class CmpOp { Le, Lt, Ge, Gt };

inline std::string cmp_op_name(CmpOp op) {
  switch (op) {
    case CmpOp::Le: return "le";
    case CmpOp::Lt: return "lt";
    case CmpOp::Ge: return "ge";
    case CmpOp::Gt: return "gt";
  }
  return "le";
}

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Program;
using ProgramPtr = std::shared_ptr<const Program>;

// S-expression AST. Join/Count hold `child`; And holds `child` and `right`;
// ArgMax/ArgMin hold `child` (the set) and `relation`; Cmp holds `relation`,
// `cmp` and the pivot literal in (id, lit_type).
struct Program {
  NodeKind kind;
  std::string id;        // entity ref, class id, relation id, or literal value
  bool quoted = false;   // entity refs written with double quotes
  bool reverse = false;  // Join through (R relation)
  LiteralType lit_type = LiteralType::String;
  std::string relation;  // ArgMax/ArgMin/Cmp
  CmpOp cmp = CmpOp::Le;
  ProgramPtr child;
  ProgramPtr right;

  static ProgramPtr entity(std::string ref, bool quoted = true) {
    auto p = std::make_shared<Program>();
    p->kind = NodeKind::Entity;
    p->id = std::move(ref);
    p->quoted = quoted;
    return p;
  }
  static ProgramPtr literal(std::string value, LiteralType t) {
    auto p = std::make_shared<Program>();
    p->kind = NodeKind::Literal;
    p->id = std::move(value);
    p->lit_type = t;
    return p;
  }
  static ProgramPtr cls(std::string class_id) {
    auto p = std::make_shared<Program>();
    p->kind = NodeKind::Class;
    p->id = std::move(class_id);
    return p;
  }
  static ProgramPtr join(std::string rel, ProgramPtr c, bool rev = false) {
    auto p = std::make_shared<Program>();
    p->kind = NodeKind::Join;
    p->id = std::move(rel);
    p->reverse = rev;
    p->child = std::move(c);
    return p;
  }
  static ProgramPtr conj(ProgramPtr l, ProgramPtr r) {
    auto p = std::make_shared<Program>();
    p->kind = NodeKind::And;
    p->child = std::move(l);
    p->right = std::move(r);
    return p;
  }
  static ProgramPtr count(ProgramPtr c) {
    auto p = std::make_shared<Program>();
    p->kind = NodeKind::Count;
    p->child = std::move(c);
    return p;
  }
  static ProgramPtr arg_extreme(NodeKind k, ProgramPtr set, std::string rel) {
    auto p = std::make_shared<Program>();
    p->kind = k;
    p->child = std::move(set);
    p->relation = std::move(rel);
    return p;
  }
  static ProgramPtr compare(CmpOp op, std::string rel, std::string value, LiteralType t) {
    auto p = std::make_shared<Program>();
    p->kind = NodeKind::Cmp;
    p->cmp = op;
    p->relation = std::move(rel);
    p->id = std::move(value);
    p->lit_type = t;
    return p;
  }

  bool is_leaf() const {
    return kind == NodeKind::Entity || kind == NodeKind::Literal || kind == NodeKind::Class;
  }
  bool is_function_root() const {
    return kind == NodeKind::Count || kind == NodeKind::ArgMax || kind == NodeKind::ArgMin;
  }
};

inline std::string print(const ProgramPtr& p);

namespace detail {

inline std::string print_literal(const std::string& value, LiteralType t) {
  if (t == LiteralType::String) return "\"" + value + "\"^^string";
  return value + "^^" + literal_type_name(t);
}

}  // namespace detail

inline std::string print(const ProgramPtr& p) {
  switch (p->kind) {
    case NodeKind::Entity:
      return p->quoted ? "\"" + p->id + "\"" : p->id;
    case NodeKind::Literal:
      return detail::print_literal(p->id, p->lit_type);
    case NodeKind::Class:
      return p->id;
    case NodeKind::Join: {
      std::string rel = p->reverse ? "(R " + p->id + ")" : p->id;
      return "(JOIN " + rel + " " + print(p->child) + ")";
    }
    case NodeKind::And:
      return "(AND " + print(p->child) + " " + print(p->right) + ")";
    case NodeKind::Count:
      return "(COUNT " + print(p->child) + ")";
    case NodeKind::ArgMax:
      return "(ARGMAX " + print(p->child) + " " + p->relation + ")";
    case NodeKind::ArgMin:
      return "(ARGMIN " + print(p->child) + " " + p->relation + ")";
    case NodeKind::Cmp:
      return "(" + cmp_op_name(p->cmp) + " " + p->relation + " " +
             detail::print_literal(p->id, p->lit_type) + ")";
  }
  throw ParseError("unprintable node");
}

inline bool structurally_equal(const ProgramPtr& a, const ProgramPtr& b) {
  return print(a) == print(b);
}

namespace detail {

struct Token {
  enum Kind { LParen, RParen, Atom, Quoted } kind;
  std::string text;
  LiteralType lit_type = LiteralType::String;  // Atom/Quoted with ^^tag
  bool typed = false;
};

inline std::vector<Token> lex(const std::string& text) {
  std::vector<Token> out;
  size_t i = 0;
  auto take_type_tag = [&](Token& t) {
    // optional ^^tag suffix directly after an atom or closing quote
    if (i + 1 < text.size() && text[i] == '^' && text[i + 1] == '^') {
      i += 2;
      std::string tag;
      while (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i]))) tag += text[i++];
      auto lt = literal_type_from(tag);
      if (!lt) throw ParseError("unknown literal type tag: " + tag);
      t.lit_type = *lt;
      t.typed = true;
    }
  };
  while (i < text.size()) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '(') {
      out.push_back({Token::LParen, "("});
      ++i;
    } else if (c == ')') {
      out.push_back({Token::RParen, ")"});
      ++i;
    } else if (c == '"') {
      ++i;
      std::string s;
      while (i < text.size() && text[i] != '"') s += text[i++];
      if (i == text.size()) throw ParseError("unterminated quoted string");
      ++i;
      Token t{Token::Quoted, s};
      take_type_tag(t);
      out.push_back(t);
    } else {
      std::string s;
      while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])) &&
             text[i] != '(' && text[i] != ')' && !(text[i] == '^' && i + 1 < text.size() && text[i + 1] == '^'))
        s += text[i++];
      Token t{Token::Atom, s};
      take_type_tag(t);
      out.push_back(t);
    }
  }
  return out;
}

// Bare Freebase-style machine ids (m.xxx / g.xxx) denote entities; any other
// bare atom in operand position is a class reference.
inline bool looks_like_entity_id(const std::string& s) {
  return (s.rfind("m.", 0) == 0 || s.rfind("g.", 0) == 0) && s.size() > 2;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  ProgramPtr parse_root() {
    if (toks_.empty()) throw ParseError("empty program");
    ProgramPtr p = parse_expr(/*at_root=*/true);
    if (pos_ != toks_.size()) throw ParseError("trailing tokens after program");
    return p;
  }

 private:
  const Token& peek() const {
    if (pos_ >= toks_.size()) throw ParseError("unbalanced parentheses: unexpected end of input");
    return toks_[pos_];
  }
  Token next() {
    Token t = peek();
    ++pos_;
    return t;
  }
  void expect_rparen() {
    if (pos_ >= toks_.size() || toks_[pos_].kind != Token::RParen)
      throw ParseError("unbalanced parentheses");
    ++pos_;
  }

  ProgramPtr parse_operand() {
    const Token& t = peek();
    if (t.kind == Token::LParen) return parse_expr(false);
    if (t.kind == Token::RParen) throw ParseError("arity violation: missing operand");
    Token tok = next();
    if (tok.typed) return Program::literal(tok.text, tok.lit_type);
    if (tok.kind == Token::Quoted) return Program::entity(tok.text, true);
    // numeric atoms without a tag stay entities/classes only if non-numeric
    if (looks_like_entity_id(tok.text)) return Program::entity(tok.text, false);
    return Program::cls(tok.text);
  }

  std::string parse_atom(const char* what) {
    const Token& t = peek();
    if (t.kind != Token::Atom) throw ParseError(std::string("expected ") + what);
    return next().text;
  }

  ProgramPtr parse_expr(bool at_root) {
    if (peek().kind != Token::LParen) return parse_operand();
    next();  // (
    std::string head = parse_atom("operator head");
    if (head == "JOIN") {
      std::string rel;
      bool rev = false;
      if (peek().kind == Token::LParen) {
        next();
        std::string r = parse_atom("R");
        if (r != "R") throw ParseError("unknown operator head inside JOIN: " + r);
        rel = parse_atom("relation");
        expect_rparen();
        rev = true;
      } else {
        rel = parse_atom("relation");
      }
      ProgramPtr child = parse_expr(false);
      expect_rparen();
      return Program::join(rel, child, rev);
    }
    if (head == "AND") {
      ProgramPtr l = parse_expr(false);
      ProgramPtr r = parse_expr(false);
      expect_rparen();
      return Program::conj(l, r);
    }
    if (head == "COUNT" || head == "ARGMAX" || head == "ARGMIN") {
      if (!at_root) throw ParseError(head + " is only allowed as the outermost operator");
      if (head == "COUNT") {
        ProgramPtr c = parse_expr(false);
        expect_rparen();
        return Program::count(c);
      }
      ProgramPtr set = parse_expr(false);
      std::string rel = parse_atom("relation");
      expect_rparen();
      return Program::arg_extreme(head == "ARGMAX" ? NodeKind::ArgMax : NodeKind::ArgMin,
                                  set, rel);
    }
    if (head == "le" || head == "lt" || head == "ge" || head == "gt") {
      CmpOp op = head == "le" ? CmpOp::Le : head == "lt" ? CmpOp::Lt
                 : head == "ge" ? CmpOp::Ge : CmpOp::Gt;
      std::string rel = parse_atom("relation");
      Token lit = next();
      if (!lit.typed)
        throw ParseError("comparative pivot must be a typed literal, got: " + lit.text);
      expect_rparen();
      return Program::compare(op, rel, lit.text, lit.lit_type);
    }
    if (head == "R") throw ParseError("R is only allowed inside JOIN");
    throw ParseError("unknown operator head: " + head);
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
};

}  // namespace detail

inline ProgramPtr parse(const std::string& text) {
  return detail::Parser(detail::lex(text)).parse_root();
}

// Number of JOIN nodes; (R r) does not add.
inline int complexity(const ProgramPtr& p) {
  if (p->is_leaf() || p->kind == NodeKind::Cmp) return 0;
  int n = p->kind == NodeKind::Join ? 1 : 0;
  if (p->child) n += complexity(p->child);
  if (p->right) n += complexity(p->right);
  return n;
}

// All relation and class ids mentioned by the program.
inline void collect_schema_items(const ProgramPtr& p, std::set<std::string>& out) {
  switch (p->kind) {
    case NodeKind::Class: out.insert(p->id); break;
    case NodeKind::Join: out.insert(p->id); break;
    case NodeKind::ArgMax:
    case NodeKind::ArgMin:
    case NodeKind::Cmp: out.insert(p->relation); break;
    default: break;
  }
  if (p->child) collect_schema_items(p->child, out);
  if (p->right) collect_schema_items(p->right, out);
}

inline std::set<std::string> schema_items_of(const ProgramPtr& p) {
  std::set<std::string> out;
  collect_schema_items(p, out);
  return out;
}

namespace detail {

// Entity ref -> class id (lexicographically first; `entity` if unresolvable);
// literal -> its type tag.
inline ProgramPtr anonymize_node(const ProgramPtr& p, const KnowledgeGraph* kg) {
  switch (p->kind) {
    case NodeKind::Entity: {
      if (kg) {
        if (auto id = kg->resolve_entity(p->id)) {
          const auto& cls = kg->classes_of(*id);
          if (!cls.empty()) return Program::cls(cls.front());
        }
      }
      return Program::cls("entity");
    }
    case NodeKind::Literal:
      return Program::cls(literal_type_name(p->lit_type));
    case NodeKind::Cmp: {
      auto q = std::make_shared<Program>(*p);
      q->kind = NodeKind::Cmp;
      // pivot literal shown as its type tag in patterns
      q->id = literal_type_name(p->lit_type);
      q->lit_type = LiteralType::String;
      return q;
    }
    default: {
      auto q = std::make_shared<Program>(*p);
      if (p->child) q->child = anonymize_node(p->child, kg);
      if (p->right) q->right = anonymize_node(p->right, kg);
      return q;
    }
  }
}

inline std::string print_pattern(const ProgramPtr& p) {
  // Like print(), but anonymized Cmp pivots print bare (no quotes/tag).
  switch (p->kind) {
    case NodeKind::Cmp:
      return "(" + cmp_op_name(p->cmp) + " " + p->relation + " " + p->id + ")";
    case NodeKind::Join: {
      std::string rel = p->reverse ? "(R " + p->id + ")" : p->id;
      return "(JOIN " + rel + " " + print_pattern(p->child) + ")";
    }
    case NodeKind::And:
      return "(AND " + print_pattern(p->child) + " " + print_pattern(p->right) + ")";
    case NodeKind::Count:
      return "(COUNT " + print_pattern(p->child) + ")";
    case NodeKind::ArgMax:
      return "(ARGMAX " + print_pattern(p->child) + " " + p->relation + ")";
    case NodeKind::ArgMin:
      return "(ARGMIN " + print_pattern(p->child) + " " + p->relation + ")";
    default:
      return p->id;
  }
}

}  // namespace detail

inline std::string pattern_of(const ProgramPtr& p, const KnowledgeGraph* kg = nullptr) {
  return detail::print_pattern(detail::anonymize_node(p, kg));
}

// Pattern fragments with one set-valued child replaced by `#var`.
inline std::set<std::string> subexpressions(const ProgramPtr& p) {
  std::set<std::string> out;
  std::function<void(const ProgramPtr&)> walk = [&](const ProgramPtr& n) {
    auto anon_str = [&](const ProgramPtr& c) {
      return detail::print_pattern(detail::anonymize_node(c, nullptr));
    };
    switch (n->kind) {
      case NodeKind::Join:
        out.insert("(JOIN " + std::string(n->reverse ? "(R " + n->id + ")" : n->id) + " #var)");
        walk(n->child);
        break;
      case NodeKind::And:
        out.insert("(AND " + anon_str(n->right) + " #var)");
        out.insert("(AND " + anon_str(n->child) + " #var)");
        walk(n->child);
        walk(n->right);
        break;
      case NodeKind::Count:
        out.insert("(COUNT #var)");
        walk(n->child);
        break;
      case NodeKind::ArgMax:
        out.insert("(ARGMAX " + n->relation + " #var)");
        walk(n->child);
        break;
      case NodeKind::ArgMin:
        out.insert("(ARGMIN " + n->relation + " #var)");
        walk(n->child);
        break;
      default:
        break;
    }
  };
  walk(p);
  return out;
}

namespace detail {

inline std::vector<std::string> dot_components(const std::string& id) {
  return split_on(id, '.');
}

// Class that makes a JOIN fragment executable on its own. Freebase-style
// relation ids (domain.class.prop) carry it as their prefix; otherwise fall
// back to the nearest enclosing class reference.
inline std::optional<std::string> join_wrap_class(const ProgramPtr& join_node,
                                                  const std::optional<std::string>& enclosing) {
  if (join_node->kind == NodeKind::Join && !join_node->reverse) {
    auto comps = dot_components(join_node->id);
    if (comps.size() >= 3) {
      comps.pop_back();
      return join(comps, ".");
    }
  }
  if (join_node->kind == NodeKind::Cmp) {
    auto comps = dot_components(join_node->relation);
    if (comps.size() >= 3) {
      comps.pop_back();
      return join(comps, ".");
    }
  }
  return enclosing;
}

struct DecompElem {
  ProgramPtr node;      // node within the full program
  ProgramPtr printed;   // executable stand-alone form
  std::optional<std::string> enclosing_class;  // nearest class above `node`
};

inline void decompose_walk(const ProgramPtr& n, std::optional<std::string> enclosing_class,
                           std::vector<DecompElem>& out) {
  // Track nearest enclosing class: an AND with a class operand scopes its
  // other operand.
  std::optional<std::string> scope = enclosing_class;
  if (n->kind == NodeKind::And) {
    if (n->child->kind == NodeKind::Class) scope = n->child->id;
    else if (n->right->kind == NodeKind::Class) scope = n->right->id;
  }
  if (n->child && !n->child->is_leaf()) decompose_walk(n->child, scope, out);
  if (n->right && !n->right->is_leaf()) decompose_walk(n->right, scope, out);

  if (n->is_leaf()) return;
  ProgramPtr printed;
  switch (n->kind) {
    case NodeKind::Join:
    case NodeKind::Cmp: {
      auto wrap = join_wrap_class(n, enclosing_class);
      printed = wrap ? Program::conj(Program::cls(*wrap), n) : n;
      break;
    }
    default:
      printed = n;
      break;
  }
  out.push_back({n, printed, enclosing_class});
}

}  // namespace detail

// Least-to-most decomposition: post-order over composite nodes, each emitted
// in an independently executable form, ending with the full program.
inline std::vector<detail::DecompElem> decompose_elements(const ProgramPtr& p) {
  std::vector<detail::DecompElem> elems;
  if (!p->is_leaf()) {
    // children first, then the root itself (emitted as-is)
    std::optional<std::string> scope;
    if (p->kind == NodeKind::And) {
      if (p->child->kind == NodeKind::Class) scope = p->child->id;
      else if (p->right->kind == NodeKind::Class) scope = p->right->id;
    }
    if (p->child && !p->child->is_leaf()) detail::decompose_walk(p->child, scope, elems);
    if (p->right && !p->right->is_leaf()) detail::decompose_walk(p->right, scope, elems);
  }
  elems.push_back({p, p, std::nullopt});

  std::vector<detail::DecompElem> out;
  std::set<std::string> seen;
  for (auto& e : elems) {
    std::string s = print(e.printed);
    if (seen.insert(s).second) out.push_back(e);
  }
  // the full program is always last
  std::string full = print(p);
  if (print(out.back().printed) != full) {
    // a duplicate earlier in the list swallowed the root; move it to the end
    for (size_t i = 0; i + 1 < out.size(); ++i) {
      if (print(out[i].printed) == full) {
        auto root = out[i];
        out.erase(out.begin() + i);
        out.push_back(root);
        break;
      }
    }
  }
  return out;
}

inline std::vector<ProgramPtr> decompose(const ProgramPtr& p) {
  std::vector<ProgramPtr> out;
  for (const auto& e : decompose_elements(p)) out.push_back(e.printed);
  return out;
}

// Replace mention spans by class ids, left to right.
struct MentionSpan {
  size_t begin = 0;
  size_t length = 0;
  std::string replacement;
};

inline std::string anonymize_question(const std::string& q, std::vector<MentionSpan> mentions) {
  std::sort(mentions.begin(), mentions.end(),
            [](const MentionSpan& a, const MentionSpan& b) { return a.begin < b.begin; });
  size_t prev_end = 0;
  std::string out;
  for (const auto& m : mentions) {
    if (m.begin < prev_end) throw std::runtime_error("overlapping mention spans");
    if (m.begin + m.length > q.size()) throw std::runtime_error("mention span out of bounds");
    out += q.substr(prev_end, m.begin - prev_end);
    out += m.replacement;
    prev_end = m.begin + m.length;
  }
  out += q.substr(prev_end);
  return out;
}

}  // namespace kgqa
