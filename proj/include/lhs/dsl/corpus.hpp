#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lhs/dsl/program.hpp"

namespace lhs::dsl {

struct CorpusEntry {
  Program program;
  std::string source = "seed";  // seed|syntactic|parametric|behavioral
  std::optional<double> score;
};

// JSON lines, one object per program:
// {"id","task","tokens":[spellings],"source","score":number|null}
void write_corpus(const std::string& path, const std::vector<CorpusEntry>& entries);
std::vector<CorpusEntry> read_corpus(const std::string& path);

// Token spellings in id order, written next to the corpus so readers never
// depend on this binary's constants.
void write_vocab_json(const std::string& path);

}  // namespace lhs::dsl
