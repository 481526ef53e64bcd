#pragma once

// Random formulas and traces for the property suites.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "qmon/formula.hpp"
#include "qmon/semantics.hpp"

namespace qmon {

struct FormulaGen {
  std::vector<std::string> atoms{"a", "b", "c", "d"};
  std::size_t max_depth = 5;
  // Upper bound on node count; 0 means unbounded.
  std::size_t max_size = 0;
  double leaf_bias = 0.25;  // chance of stopping early at an inner level
};

Formula random_formula(std::mt19937_64& rng, const FormulaGen& gen);

// Labels drawn from {0, 1/(grid-1), ..., 1}; grid = 2 gives crisp traces.
Trace random_trace(std::mt19937_64& rng, const std::vector<std::string>& atoms, std::size_t length,
                   int grid = 5);

}  // namespace qmon
