#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "lhs/dsl/vocab.hpp"

namespace lhs::dsl {

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// A parsed prefix expression. `tokens` holds expression tokens only (no
// BOS/EOS/PAD); construction goes through parse() so an instance is always
// arity-correct and task-consistent.
struct Program {
  Task task = Task::TSP;
  std::vector<int> tokens;

  bool operator==(const Program& o) const { return task == o.task && tokens == o.tokens; }
};

// Stable FNV-1a content hash over task + token ids.
std::uint64_t program_hash(const Program& p);
std::string program_id(const Program& p);  // 16 hex digits

Program parse(Task task, const std::vector<int>& tokens);
Program parse_spellings(Task task, const std::vector<std::string>& spellings);

std::vector<std::string> serialize(const Program& p);

// Token count of the subtree rooted at pos.
std::size_t subtree_extent(const std::vector<int>& tokens, std::size_t pos);

}  // namespace lhs::dsl
