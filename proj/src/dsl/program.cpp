#include "lhs/dsl/program.hpp"

#include <cstdio>

namespace lhs::dsl {

std::uint64_t program_hash(const Program& p) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ULL;
  };
  mix(static_cast<std::uint64_t>(p.task) + 0x51ULL);
  for (int t : p.tokens) mix(static_cast<std::uint64_t>(t) + 1);
  return h;
}

std::string program_id(const Program& p) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(program_hash(p)));
  return buf;
}

Program parse(Task task, const std::vector<int>& tokens) {
  if (tokens.empty()) throw ParseError("parse: empty token sequence");
  if (tokens.size() > kMaxProgramTokens) {
    throw ParseError("parse: " + std::to_string(tokens.size()) + " tokens exceed the budget of " +
                     std::to_string(kMaxProgramTokens));
  }
  const int features = static_cast<int>(feature_count(task));
  std::size_t need = 1;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int t = tokens[i];
    const int a = arity(t);
    if (a < 0) {
      throw ParseError("parse: token id " + std::to_string(t) +
                       " is not an expression token (position " + std::to_string(i) + ")");
    }
    if (need == 0) {
      throw ParseError("parse: trailing tokens after a complete expression (position " +
                       std::to_string(i) + ")");
    }
    if (is_feature(t) && feature_index(t) >= features) {
      throw ParseError("parse: feature " + token_spelling(t) + " not available for task " +
                       task_name(task));
    }
    need = need - 1 + static_cast<std::size_t>(a);
  }
  if (need != 0) {
    throw ParseError("parse: expression incomplete, " + std::to_string(need) +
                     " operand(s) missing");
  }
  Program p;
  p.task = task;
  p.tokens = tokens;
  return p;
}

Program parse_spellings(Task task, const std::vector<std::string>& spellings) {
  std::vector<int> ids;
  ids.reserve(spellings.size());
  for (const auto& s : spellings) ids.push_back(token_from_spelling(s));
  return parse(task, ids);
}

std::vector<std::string> serialize(const Program& p) {
  std::vector<std::string> out;
  out.reserve(p.tokens.size());
  for (int t : p.tokens) out.push_back(token_spelling(t));
  return out;
}

std::size_t subtree_extent(const std::vector<int>& tokens, std::size_t pos) {
  std::size_t need = 1, i = pos;
  while (need > 0) {
    if (i >= tokens.size()) throw std::logic_error("subtree_extent: truncated expression");
    need = need - 1 + static_cast<std::size_t>(arity(tokens[i]));
    ++i;
  }
  return i - pos;
}

}  // namespace lhs::dsl
