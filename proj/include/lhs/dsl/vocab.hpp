#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace lhs::dsl {

enum class Task { TSP, CVRP, KNAPSACK, OBP };

const char* task_name(Task t);
Task task_from_name(const std::string& name);

// Feature columns available to programs of a task (F0..F{n-1}).
std::size_t feature_count(Task t);

// Token ids are dense and frozen; the corpus serializes spellings, so any
// reordering here would be a format break.
namespace tok {
constexpr int PAD = 0;
constexpr int BOS = 1;
constexpr int EOS = 2;
constexpr int ADD = 3;
constexpr int SUB = 4;
constexpr int MUL = 5;
constexpr int DIV = 6;
constexpr int MIN = 7;
constexpr int MAX = 8;
constexpr int NEG = 9;
constexpr int ABS = 10;
constexpr int EXP = 11;
constexpr int LOG = 12;
constexpr int SQRT = 13;
constexpr int C_BASE = 14;  // 9 grid constants
constexpr int F_BASE = 23;  // 8 feature slots
constexpr int VOCAB = 31;
}  // namespace tok

constexpr std::size_t kMaxProgramTokens = 64;
constexpr std::size_t kConstantCount = 9;
constexpr std::size_t kFeatureSlots = 8;

const std::array<double, kConstantCount>& constant_grid();

bool is_operator(int token);
bool is_constant(int token);
bool is_feature(int token);

// 2 for binary, 1 for unary, 0 for leaves; control tokens are not expression
// tokens and report -1.
int arity(int token);

double constant_value(int token);
int constant_index(int token);
int constant_token_at(std::size_t grid_index);

int feature_index(int token);
int feature_token(int index);

const std::string& token_spelling(int token);
int token_from_spelling(const std::string& s);  // throws on unknown spelling

}  // namespace lhs::dsl
