#pragma once

#include <vector>

#include "lhs/dsl/program.hpp"

namespace lhs::dsl {

// One decision point: candidates x features, plus a feasibility mask. The
// rollout layer guarantees at least one feasible candidate before asking a
// program to score the frame.
struct FeatureFrame {
  Task task = Task::TSP;
  std::size_t candidates = 0;
  std::size_t features = 0;
  std::vector<double> matrix;    // row-major candidates x features
  std::vector<char> feasible;    // one flag per candidate

  double at(std::size_t c, std::size_t f) const { return matrix[c * features + f]; }
  double& at(std::size_t c, std::size_t f) { return matrix[c * features + f]; }
};

FeatureFrame make_frame(Task task, std::size_t candidates);

// Columnar evaluation of the prefix expression over all candidates.
// DIV/LOG/SQRT are protected; EXP is not, so overflow shows up as a
// non-finite score and the program counts as invalid downstream.
std::vector<double> interpret(const Program& p, const FeatureFrame& frame);

// Argmax over feasible candidates, lowest index wins ties; -1 if none
// feasible or any feasible score is non-finite.
int select_action(const std::vector<double>& scores, const std::vector<char>& feasible);

// Eight fixed synthetic frames per task (deterministic, all feasible), used
// for behavioral dedupe and seed-program validation.
const std::vector<FeatureFrame>& probe_frames(Task task);

bool valid_on_probes(const Program& p);

}  // namespace lhs::dsl
