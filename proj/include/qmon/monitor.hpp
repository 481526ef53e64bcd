#pragma once

// Quantitative reward monitors (input-free register machines) and Boolean
// reward monitors (Moore machines built on the fly by progression).

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "qmon/formula.hpp"
#include "qmon/obligation.hpp"

namespace qmon {

enum class ExprOp : std::uint8_t { Const, Label, Reg, Complement, Min, Max };

// One postfix token. Const uses `value`, Label and Reg use `index`.
struct ExprNode {
  ExprOp op;
  double value = 0.0;
  std::uint32_t index = 0;
  bool operator==(const ExprNode&) const = default;
};

struct Instruction {
  std::uint32_t target;
  std::vector<ExprNode> expr;
};

struct Register {
  std::string name;
  double initial;
};

struct Qrm {
  Formula formula = Formula::top();
  std::vector<std::string> atoms;  // label order expected by init/step
  std::vector<Register> registers;
  std::vector<std::vector<Instruction>> program;  // per state, executed in order
  std::vector<std::uint32_t> successor;
  std::uint32_t initial_state = 0;
  std::uint32_t reward_register = 0;
  double weight = 1.0;
  // False when some temporal subformula exceeded the exact construction's
  // budget and was compiled with the running-register approximation.
  bool exact = true;

  std::size_t num_states() const { return program.size(); }
  std::size_t num_instructions() const;
  std::uint32_t register_index(const std::string& name) const;
};

class MissingLabel : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MonitorTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
struct Fragment;
}

// Memo table for synth(). Structurally equal subformulas are constructed once
// and re-embedded with fresh registers.
class SynthCache {
 public:
  SynthCache();
  ~SynthCache();
  SynthCache(const SynthCache&) = delete;
  SynthCache& operator=(const SynthCache&) = delete;

  std::size_t constructions() const { return total_; }
  std::size_t constructions(const Formula& f) const;

 private:
  friend struct CacheAccess;
  std::unordered_map<Formula, std::shared_ptr<const detail::Fragment>, FormulaHash> fragments_;
  std::unordered_map<Formula, std::size_t, FormulaHash> counts_;
  std::size_t total_ = 0;
};

// Stem and cycle length of the state graph synth() produces for f.
struct LassoShape {
  std::size_t stem;
  std::size_t cycle;
  std::size_t states() const { return stem + cycle; }
  bool operator==(const LassoShape&) const = default;
};
LassoShape lasso_shape(const Formula& f);

Qrm synth(const Formula& f, SynthCache& cache);
Qrm synth(const Formula& f);
// Uncached construction of a single formula.
Qrm construct(const Formula& f);

struct MonitorState {
  std::uint32_t q = 0;
  std::vector<double> values;
  std::size_t steps = 0;
};

// Labels are given in m.atoms order, or by name.
MonitorState init(const Qrm& m, std::span<const double> labels);
MonitorState init(const Qrm& m, const std::map<std::string, double>& labels);
void step(const Qrm& m, MonitorState& ms, std::span<const double> labels);
void step(const Qrm& m, MonitorState& ms, const std::map<std::string, double>& labels);
MonitorState step(const MonitorState& ms, const Qrm& m, const std::map<std::string, double>& labels);
// V(t_reward) * weight.
double reward(const MonitorState& ms, const Qrm& m);
// V(t_reward).
double reward_value(const MonitorState& ms, const Qrm& m);

std::vector<double> labels_for(const std::vector<std::string>& atoms,
                               const std::map<std::string, double>& labels);

// Runs one state's instruction list (shared by the scalar runtime and tests).
void execute(const Qrm& m, std::uint32_t state, std::span<const double> labels,
             std::span<double> values);

std::string expr_to_string(const Qrm& m, const std::vector<ExprNode>& expr);
std::string serialize(const Qrm& m);
std::string to_dot(const Qrm& m);

// ---------------------------------------------------------------------------

class NonCrispLabel : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Moore machine over crisp letters. States are antichains of obligation sets
// (disjunctions of conjunctions of pending next-step obligations); the
// transition table is filled in lazily and is safe to share between threads.
class BooleanMonitor {
 public:
  explicit BooleanMonitor(const Formula& f, double weight = 1.0);

  const Formula& formula() const { return formula_; }
  const std::vector<std::string>& atoms() const { return atoms_; }
  double weight() const { return weight_; }

  // State before any letter is read.
  std::uint32_t start() const { return 0; }
  std::uint32_t step(std::uint32_t q, std::uint64_t letter) const;
  std::uint32_t step(std::uint32_t q, std::span<const double> labels) const;
  int output(std::uint32_t q) const;
  // The progression reached false: no continuation can satisfy the formula.
  bool is_bottom(std::uint32_t q) const;

  std::size_t states_materialized() const;
  std::string describe(std::uint32_t q) const;

  static std::uint64_t letter_of(std::span<const double> labels);

 private:
  using Antichain = std::vector<ObligationSet>;
  std::uint32_t intern(Antichain a) const;

  Formula formula_;
  double weight_;
  std::vector<std::string> atoms_;
  mutable std::mutex mutex_;
  mutable ObligationStore store_;
  mutable std::vector<Antichain> states_;
  mutable std::vector<std::uint8_t> accepting_;
  mutable std::map<Antichain, std::uint32_t> index_;
  mutable std::vector<std::unordered_map<std::uint64_t, std::uint32_t>> transitions_;
};

struct BrmStep {
  std::uint32_t state;
  int output;
};

std::shared_ptr<const BooleanMonitor> brm_build(const Formula& f, double weight = 1.0);
BrmStep brm_step(const BooleanMonitor& bm, std::uint32_t q, const std::map<std::string, double>& labels);

}  // namespace qmon
