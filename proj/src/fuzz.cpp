#include "qmon/fuzz.hpp"

#include <array>

namespace qmon {

namespace {

Formula leaf(std::mt19937_64& rng, const FormulaGen& gen) {
  std::uniform_int_distribution<std::size_t> pick(0, gen.atoms.size() + 1);
  const std::size_t k = pick(rng);
  if (k < gen.atoms.size()) return Formula::atom(gen.atoms[k]);
  // true and false are rarer than atoms
  std::bernoulli_distribution coin(0.5);
  if (coin(rng)) return Formula::atom(gen.atoms[k % gen.atoms.size()]);
  return k == gen.atoms.size() ? Formula::top() : Formula::bottom();
}

Formula grow(std::mt19937_64& rng, const FormulaGen& gen, std::size_t depth, std::size_t& budget) {
  std::bernoulli_distribution stop(gen.leaf_bias);
  if (depth <= 1 || budget < 2 || stop(rng)) {
    if (budget > 0) --budget;
    return leaf(rng, gen);
  }
  static constexpr std::array<Op, 8> kOps{Op::Not, Op::And, Op::Or, Op::Next,
                                          Op::Until, Op::Release, Op::Eventually, Op::Always};
  std::uniform_int_distribution<std::size_t> pick(0, kOps.size() - 1);
  Op op = kOps[pick(rng)];
  const bool binary = op == Op::And || op == Op::Or || op == Op::Until || op == Op::Release;
  if (binary && budget < 3) op = Op::Not;
  --budget;
  if (op == Op::Not || op == Op::Next || op == Op::Eventually || op == Op::Always) {
    Formula c = grow(rng, gen, depth - 1, budget);
    switch (op) {
      case Op::Not: return Formula::negation(c);
      case Op::Next: return Formula::next(c);
      case Op::Eventually: return Formula::eventually(c);
      default: return Formula::always(c);
    }
  }
  --budget;  // reserved for the right operand
  Formula l = grow(rng, gen, depth - 1, budget);
  ++budget;
  Formula r = grow(rng, gen, depth - 1, budget);
  switch (op) {
    case Op::And: return Formula::conj(l, r);
    case Op::Or: return Formula::disj(l, r);
    case Op::Until: return Formula::until(l, r);
    default: return Formula::release(l, r);
  }
}

}  // namespace

Formula random_formula(std::mt19937_64& rng, const FormulaGen& gen) {
  std::size_t budget = gen.max_size == 0 ? std::size_t(-1) / 2 : gen.max_size;
  return grow(rng, gen, gen.max_depth, budget);
}

Trace random_trace(std::mt19937_64& rng, const std::vector<std::string>& atoms, std::size_t length,
                   int grid) {
  Trace t(atoms);
  std::uniform_int_distribution<int> pick(0, grid - 1);
  for (std::size_t i = 0; i < length; ++i) {
    std::vector<double> row(atoms.size());
    for (auto& v : row) v = static_cast<double>(pick(rng)) / (grid - 1);
    t.push(std::move(row));
  }
  return t;
}

}  // namespace qmon
