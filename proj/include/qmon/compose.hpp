#pragma once

// Specification-reward bundles: several monitors stepped in lockstep whose
// rewards are summed, with a latching veto once a safety formula fails.

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qmon/formula.hpp"
#include "qmon/monitor.hpp"

namespace qmon {

enum class Mode : std::uint8_t { Boolean, Quantitative };

std::string_view mode_name(Mode m);
Mode parse_mode(std::string_view s);

class SpecRewardPair {
 public:
  SpecRewardPair(Formula formula, double weight, Mode mode);
  // Parses `formula`; throws ParseError.
  SpecRewardPair(std::string_view formula, double weight, Mode mode);

  const Formula& formula() const { return formula_; }
  double weight() const { return weight_; }
  Mode mode() const { return mode_; }
  bool safety() const { return safety_; }

 private:
  Formula formula_;
  double weight_;
  Mode mode_;
  bool safety_;
};

class ComposeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Runtime state of a bundle: one slot per component plus the veto latch.
struct CompositeState {
  std::vector<MonitorState> quant;  // indexed by component, unused for Boolean ones
  std::vector<std::uint32_t> q;     // automaton state per component
  bool violated = false;
  bool started = false;
  double last_reward = 0.0;
  std::vector<double> scratch;
};

// Immutable bundle template. Components read labels from a fixed atom
// universe (normally the environment's), given as index-aligned spans.
class CompositeMonitor {
 public:
  // Every component is quantitative (synth) or Boolean (progression) by its
  // pair's mode. Throws ComposeError on an empty bundle, zeta > 0, or an atom
  // outside `universe`.
  CompositeMonitor(std::vector<SpecRewardPair> pairs, double zeta, std::vector<std::string> universe,
                   double veto_threshold = 1e-9);

  std::size_t size() const { return pairs_.size(); }
  const SpecRewardPair& pair(std::size_t i) const { return pairs_.at(i); }
  double zeta() const { return zeta_; }
  double veto_threshold() const { return veto_threshold_; }
  const std::vector<std::string>& universe() const { return universe_; }

  // Non-null for quantitative components.
  const Qrm* qrm(std::size_t i) const;
  // Non-null for Boolean components.
  const BooleanMonitor* brm(std::size_t i) const;

  // Reads the first letter. Returns the reward for that one-letter prefix.
  double start(CompositeState& st, std::span<const double> boolean_labels,
               std::span<const double> quant_labels) const;
  // Reads the next letter and returns the bundle reward.
  double step(CompositeState& st, std::span<const double> boolean_labels,
              std::span<const double> quant_labels) const;

  // Weighted reward of component i in the current state (veto not applied).
  double component_reward(const CompositeState& st, std::size_t i) const;
  // Whether component i currently counts as violated (safety components only).
  bool component_violated(const CompositeState& st, std::size_t i) const;

 private:
  struct Component {
    std::shared_ptr<const Qrm> qrm;
    std::shared_ptr<const BooleanMonitor> brm;
    std::vector<std::uint32_t> slots;  // component atom k reads universe[slots[k]]
  };

  double settle(CompositeState& st) const;
  void gather(const Component& c, std::span<const double> labels, std::vector<double>& out) const;

  std::vector<SpecRewardPair> pairs_;
  std::vector<Component> components_;
  double zeta_;
  double veto_threshold_;
  std::vector<std::string> universe_;
};

std::shared_ptr<const CompositeMonitor> compose(std::vector<SpecRewardPair> pairs, double zeta,
                                                std::vector<std::string> universe);
// Same bundle with every pair forced to `mode`.
std::shared_ptr<const CompositeMonitor> compose(std::vector<SpecRewardPair> pairs, double zeta,
                                                std::vector<std::string> universe, Mode mode);

// Map-labelled stepping; the first call on a fresh state starts it.
double composite_step(const CompositeMonitor& cm, CompositeState& st,
                      const std::map<std::string, double>& boolean_labels,
                      const std::map<std::string, double>& quant_labels);

}  // namespace qmon
