#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "kgqa/kg.hpp"

#ifndef KGQA_DATA_DIR
#define KGQA_DATA_DIR "data"
#endif

namespace kgqa::test {

inline std::string data_path(const std::string& rel) {
  return std::string(KGQA_DATA_DIR) + "/" + rel;
}

inline KnowledgeGraph load_toykg() {
  std::ifstream triples(data_path("toykg/triples.tsv"));
  std::ifstream schema(data_path("toykg/schema.tsv"));
  std::ifstream labels(data_path("toykg/labels.tsv"));
  if (!triples || !schema || !labels) throw std::runtime_error("toykg fixtures missing");
  return load_graph(triples, schema, &labels);
}

// Schema-only graph for the meteorology prompt goldens.
inline KnowledgeGraph meteorology_kg() {
  std::istringstream triples("");
  std::istringstream schema(
      "type\trelation\tinstance of\n"
      "meteorology.tropical_cyclone\tclass\ttropical cyclone\n"
      "meteorology.tropical_cyclone_category\tclass\ttropical cyclone category\n"
      "meteorology.tropical_cyclone_category.tropical_cyclones\trelation\ttropical cyclones\n"
      "meteorology.tropical_cyclone.category\trelation\tcategory\n"
      "meteorology.tropical_cyclone.affected_areas\trelation\taffected areas\n");
  return load_graph(triples, schema);
}

}  // namespace kgqa::test
