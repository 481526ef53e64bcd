#pragma once

// LTLf[F] formulas: immutable, structurally shared syntax trees.
//
// F, G and | are primitive nodes so the monitor compiler can give them
// dedicated constructions. Implication and equivalence only exist in the
// concrete syntax and are desugared by the parser.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qmon {

enum class Op : std::uint8_t {
  True,
  False,
  Atom,
  Not,
  And,
  Or,
  Next,
  Until,
  Release,
  Eventually,
  Always,
};

std::string_view op_name(Op op);

class Formula {
 public:
  static Formula top();
  static Formula bottom();
  static Formula atom(std::string name);
  static Formula negation(Formula f);
  static Formula conj(Formula lhs, Formula rhs);
  static Formula disj(Formula lhs, Formula rhs);
  static Formula next(Formula f);
  static Formula until(Formula lhs, Formula rhs);
  static Formula release(Formula lhs, Formula rhs);
  static Formula eventually(Formula f);
  static Formula always(Formula f);

  Op op() const;
  // Only meaningful for atoms.
  const std::string& name() const;
  std::size_t arity() const;
  // Unary operators store their operand in child(0).
  const Formula& child(std::size_t i) const;
  const Formula& lhs() const { return child(0); }
  const Formula& rhs() const { return child(1); }

  // Node identity. Two handles copied from each other share it; two
  // structurally equal formulas built separately do not.
  const void* id() const { return node_.get(); }
  std::size_t hash() const;

  bool is_temporal() const;  // contains X, U, R, F or G anywhere

  friend bool operator==(const Formula& a, const Formula& b);
  friend bool operator!=(const Formula& a, const Formula& b) { return !(a == b); }

 private:
  struct Node;
  explicit Formula(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  static Formula make(Op op, std::string name, std::vector<Formula> children);

  std::shared_ptr<const Node> node_;
};

struct FormulaHash {
  std::size_t operator()(const Formula& f) const { return f.hash(); }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t column, std::vector<std::string> expected, const std::string& message);

  // 1-based column of the offending character (length + 1 at end of input).
  std::size_t column() const { return column_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  std::size_t column_;
  std::vector<std::string> expected_;
};

// Parses the ASCII grammar (`true false ! & | -> <-> X U R F G`, identifiers
// `[a-z_][a-z0-9_]*`, parentheses) plus the Unicode aliases ¬ ∧ ∨ → ↔.
// When `atoms` is given, every identifier must belong to it.
Formula parse(std::string_view text, const std::set<std::string>* atoms = nullptr);
Formula parse(std::string_view text, const std::set<std::string>& atoms);

// ASCII rendering with minimal parentheses; parse(to_string(f)) == f.
std::string to_string(const Formula& f);

// Negations pushed to atoms. A negation directly above X is kept in place
// (X is strong, so !X f and X !f differ at the last index).
Formula to_nnf(const Formula& f);

// Syntactic safety: NNF built only from true, false, p, !p, &, |, X, R, G.
bool is_safe(const Formula& f);

std::size_t size(const Formula& f);
std::size_t depth(const Formula& f);
std::set<std::string> atoms(const Formula& f);

}  // namespace qmon
