#include "lhs/dsl/vocab.hpp"

#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace lhs::dsl {

namespace {

const std::array<double, kConstantCount> kGrid = {-2.0, -1.0, -0.5, -0.2, 0.0,
                                                  0.2,  0.5,  1.0,  2.0};

const std::vector<std::string> kSpellings = {
    "PAD",  "BOS",  "EOS",  "ADD",  "SUB",   "MUL",  "DIV",  "MIN",
    "MAX",  "NEG",  "ABS",  "EXP",  "LOG",   "SQRT", "C-2.0", "C-1.0",
    "C-0.5", "C-0.2", "C0.0", "C0.2", "C0.5", "C1.0", "C2.0",  "F0",
    "F1",   "F2",   "F3",   "F4",   "F5",    "F6",   "F7"};

const std::unordered_map<std::string, int>& spelling_map() {
  static const std::unordered_map<std::string, int> m = [] {
    std::unordered_map<std::string, int> out;
    for (int i = 0; i < tok::VOCAB; ++i) out[kSpellings[i]] = i;
    return out;
  }();
  return m;
}

}  // namespace

const char* task_name(Task t) {
  switch (t) {
    case Task::TSP: return "TSP";
    case Task::CVRP: return "CVRP";
    case Task::KNAPSACK: return "KNAPSACK";
    case Task::OBP: return "OBP";
  }
  return "?";
}

Task task_from_name(const std::string& name) {
  if (name == "TSP") return Task::TSP;
  if (name == "CVRP") return Task::CVRP;
  if (name == "KNAPSACK") return Task::KNAPSACK;
  if (name == "OBP") return Task::OBP;
  throw std::invalid_argument("unknown task '" + name + "'");
}

std::size_t feature_count(Task t) {
  switch (t) {
    case Task::TSP:
    case Task::CVRP: return 5;
    case Task::KNAPSACK:
    case Task::OBP: return 4;
  }
  return 0;
}

const std::array<double, kConstantCount>& constant_grid() { return kGrid; }

bool is_operator(int token) { return token >= tok::ADD && token <= tok::SQRT; }

bool is_constant(int token) {
  return token >= tok::C_BASE && token < tok::C_BASE + static_cast<int>(kConstantCount);
}

bool is_feature(int token) {
  return token >= tok::F_BASE && token < tok::F_BASE + static_cast<int>(kFeatureSlots);
}

int arity(int token) {
  if (token >= tok::ADD && token <= tok::MAX) return 2;
  if (token >= tok::NEG && token <= tok::SQRT) return 1;
  if (is_constant(token) || is_feature(token)) return 0;
  return -1;
}

double constant_value(int token) {
  if (!is_constant(token)) throw std::invalid_argument("not a constant token");
  return kGrid[token - tok::C_BASE];
}

int constant_index(int token) {
  if (!is_constant(token)) throw std::invalid_argument("not a constant token");
  return token - tok::C_BASE;
}

int constant_token_at(std::size_t grid_index) {
  if (grid_index >= kConstantCount) throw std::out_of_range("constant grid index");
  return tok::C_BASE + static_cast<int>(grid_index);
}

int feature_index(int token) {
  if (!is_feature(token)) throw std::invalid_argument("not a feature token");
  return token - tok::F_BASE;
}

int feature_token(int index) {
  if (index < 0 || index >= static_cast<int>(kFeatureSlots)) {
    throw std::out_of_range("feature index");
  }
  return tok::F_BASE + index;
}

const std::string& token_spelling(int token) {
  if (token < 0 || token >= tok::VOCAB) throw std::out_of_range("token id");
  return kSpellings[token];
}

int token_from_spelling(const std::string& s) {
  auto it = spelling_map().find(s);
  if (it == spelling_map().end()) throw std::invalid_argument("unknown token '" + s + "'");
  return it->second;
}

}  // namespace lhs::dsl
