#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kgqa/kg.hpp"
#include "kgqa/program.hpp"

namespace kgqa {

struct PromptTemplates {
  std::string qgen_instruction =
      "Translate the following logical form query into a natural language question in "
      "English. The generated question must have the same meaning as the logical query. "
      "The generated question must cover all and only the information present in the "
      "logical query. The generated question should use the schema which describes the "
      "entities, relations, and functions present in the logical query. Use each previous "
      "query and solution as a hint to solve the next query.";
  std::string qgen_inverse_instruction =
      "Translate the following question into its semantic parse.";
  std::string reasoning_instruction =
      "Write a logical form expression using only elements mentioned in the provided "
      "natural language question. An \"R\" before a relation in the logical expression "
      "may be used to indicate a reverse or inverse relation.";
  std::string reasoning_inverse_instruction =
      "Write a plausible question in English that can be formed from the provided logical "
      "query as a starting point. The question must contain at least all of the "
      "information present in the logical query.";
  std::string qgen_domain_prefix = "### English Question:\n";
  std::string reasoning_domain_prefix = "### Logical Form:\n";
};

namespace detail {

// Schema items relevant to one L2M element, in prompt order: the enclosing
// class of the fragment within the full program, then a traversal of the
// executable form that lists each JOIN's wrap class before its child items
// and the relation after them.
inline void prompt_items_walk(const ProgramPtr& n, std::vector<std::string>& out) {
  auto add = [&](const std::string& id) {
    for (const auto& s : out)
      if (s == id) return;
    out.push_back(id);
  };
  switch (n->kind) {
    case NodeKind::Class:
      add(n->id);
      break;
    case NodeKind::Join: {
      if (auto wrap = join_wrap_class(n, std::nullopt)) add(*wrap);
      prompt_items_walk(n->child, out);
      add(n->id);
      break;
    }
    case NodeKind::And:
      prompt_items_walk(n->child, out);
      prompt_items_walk(n->right, out);
      break;
    case NodeKind::Count:
      prompt_items_walk(n->child, out);
      break;
    case NodeKind::ArgMax:
    case NodeKind::ArgMin:
      prompt_items_walk(n->child, out);
      add(n->relation);
      break;
    case NodeKind::Cmp: {
      if (auto wrap = join_wrap_class(n, std::nullopt)) add(*wrap);
      add(n->relation);
      break;
    }
    default:
      break;
  }
}

}  // namespace detail

inline std::vector<std::string> prompt_schema_items(
    const ProgramPtr& executable_form, const std::optional<std::string>& enclosing_class) {
  std::vector<std::string> out;
  if (enclosing_class) out.push_back(*enclosing_class);
  detail::prompt_items_walk(executable_form, out);
  return out;
}

// Schema line with graceful fallback for items the graph has no row for.
inline std::string schema_line(const KnowledgeGraph& kg, const std::vector<std::string>& ids) {
  std::vector<std::string> parts;
  for (const auto& id : ids) {
    auto it = kg.schema.find(id);
    if (it != kg.schema.end()) {
      parts.push_back(id + "=" + it->second.text());
    } else {
      SchemaItem fallback{id};
      parts.push_back(id + "=" + fallback.text());
    }
  }
  return join(parts, "; ");
}

struct QgenBlock {
  std::string program;
  std::string schema;
  std::optional<std::string> question;  // absent for the block being generated
};

inline std::string render_qgen_prompt(const PromptTemplates& t,
                                      const std::vector<QgenBlock>& blocks) {
  std::string out = "### Instructions:\n" + t.qgen_instruction + "\n";
  for (const auto& b : blocks) {
    out += "\n### Logical Query:\n" + b.program + "\n### Schema:\n" + b.schema +
           "\n### English Question:\n";
    if (b.question) out += *b.question + "\n";
  }
  return out;
}

inline std::string render_qgen_inverse_prompt(const PromptTemplates& t,
                                              const std::string& candidate_question) {
  return "### Instructions:\n" + t.qgen_inverse_instruction + "\n\n### Question:\n" +
         candidate_question + "\n### Semantic Parse:\n";
}

struct ReasoningDemo {
  std::string question;
  std::string logical_form;
};

inline std::string render_reasoning_prompt(const PromptTemplates& t,
                                           const std::vector<ReasoningDemo>& demos,
                                           const std::string& test_question) {
  std::string out = "### Instructions:\n" + t.reasoning_instruction + "\n";
  for (const auto& d : demos)
    out += "\n### Question:\n" + d.question + "\n### Logical Form:\n" + d.logical_form + "\n";
  out += "\n### Question:\n" + test_question + "\n### Logical Form:\n";
  return out;
}

inline std::string render_reasoning_inverse_prompt(const PromptTemplates& t,
                                                   const std::string& candidate_program) {
  return "### Instructions:\n" + t.reasoning_inverse_instruction + "\n\n### Logical Query:\n" +
         candidate_program + "\n### Plausible Question:\n";
}

}  // namespace kgqa
