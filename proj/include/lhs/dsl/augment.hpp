#pragma once

#include "lhs/dsl/interpret.hpp"
#include "lhs/math/rng.hpp"

namespace lhs::dsl {

enum class AugmentStrategy { SYNTACTIC, PARAMETRIC, BEHAVIORAL };

const char* strategy_name(AugmentStrategy s);

// Random grammar-directed program; rejection-resampled (at most 100 tries)
// until it scores finitely on the probe frames, then falls back to NEG F0.
Program sample_seed_program(Task task, lhs::math::Rng& rng, int max_depth);

// One randomly chosen rewrite of the requested tier. Returns the input
// unchanged when no rewrite site exists.
//   SYNTACTIC: value-preserving (commutative swap, NEG-NEG, MUL C1.0)
//   PARAMETRIC: one constant moves to an adjacent grid value
//   BEHAVIORAL: one feature swap, MIN<->MAX, or ADD<->SUB
Program augment(const Program& p, AugmentStrategy strategy, lhs::math::Rng& rng);

// Structural dedupe (tree hash) plus behavioral dedupe (identical scores on
// the 8 probe frames, signed zeros collapsed). First occurrence survives.
std::vector<std::size_t> dedupe_indices(const std::vector<Program>& programs);
std::vector<Program> dedupe(const std::vector<Program>& programs);

}  // namespace lhs::dsl
