#pragma once

// Obligation algebra over NNF formulas with a weak next.
//
// expand(psi) rewrites psi as a disjunction over next-step obligation sets,
// each guarded by a positive DNF over literals that must hold now. The
// quantitative register program and the Boolean progression monitor both run
// on top of it.

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "qmon/formula.hpp"

namespace qmon {

enum class NKind : std::uint8_t {
  True,
  False,
  Lit,
  And,
  Or,
  Next,
  WeakNext,
  Until,
  Release,
  Eventually,
  Always,
};

struct NNode {
  NKind kind;
  int atom = -1;  // Lit
  bool negated = false;
  int a = -1;
  int b = -1;
  auto operator<=>(const NNode&) const = default;
};

// Literal 2k is atom k, literal 2k+1 is its negation; a mask is a
// conjunction of literals.
using LitMask = std::uint64_t;
constexpr std::size_t kMaxObligationAtoms = 32;

// Minimal masks of a positive DNF. {} is false, {0} is true.
using Guard = std::vector<LitMask>;

// Sorted, duplicate-free ids of Next / WeakNext nodes.
using ObligationSet = std::vector<int>;

struct Branch {
  ObligationSet obls;
  Guard guard;
  bool operator==(const Branch&) const = default;
};

// Distinct targets; a branch whose target includes another branch's target
// keeps only guard masks not implied by that branch's guard.
using Expansion = std::vector<Branch>;

Guard guard_or(const Guard& x, const Guard& y);
Guard guard_and(const Guard& x, const Guard& y);
Expansion disjoin(const Expansion& x, const Expansion& y);
Expansion conjoin(const Expansion& x, const Expansion& y);

class ObligationStore {
 public:
  // `atoms` fixes the literal numbering; every atom of an interned formula
  // must appear in it.
  explicit ObligationStore(std::vector<std::string> atoms);

  const std::vector<std::string>& atoms() const { return atoms_; }

  // Interns the NNF of f (negation of X becomes a weak next).
  int intern(const Formula& f);
  // Always a genuine next node, usable as an obligation.
  int next_of(int id, bool weak);

  const NNode& node(int id) const { return nodes_.at(id); }
  std::size_t node_count() const { return nodes_.size(); }

  const Expansion& expand(int id);
  // Conjunction of the bodies of every obligation in s. Throws
  // std::length_error when an intermediate result exceeds `max_branches`.
  Expansion expand_set(const ObligationSet& s, std::size_t max_branches = SIZE_MAX);

  // Branch pairs combined by expand_set so far; a cost measure for callers
  // that cap construction effort.
  std::size_t work() const { return work_; }

  bool all_weak(const ObligationSet& s) const;
  // Removes WX f when X f is also present.
  ObligationSet normalize(ObligationSet s) const;

  // Literal mask of the literals made true by a crisp letter.
  static LitMask letter_literals(std::uint64_t letter, std::size_t atoms);

  std::string to_string(int id) const;
  std::string to_string(const ObligationSet& s) const;

 private:
  int make(NNode n);
  int intern_node(const NNode& n);
  int convert(const Formula& f, bool negated);
  Expansion compute_expand(int id);

  std::vector<std::string> atoms_;
  std::map<std::string, int> atom_ids_;
  std::vector<NNode> nodes_;
  std::map<NNode, int> index_;
  std::unordered_map<int, Expansion> expansions_;
  std::size_t work_ = 0;
};

}  // namespace qmon
