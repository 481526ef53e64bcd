#include "qmon/compose.hpp"

#include <algorithm>

namespace qmon {

std::string_view mode_name(Mode m) { return m == Mode::Boolean ? "boolean" : "quantitative"; }

Mode parse_mode(std::string_view s) {
  if (s == "boolean") return Mode::Boolean;
  if (s == "quantitative") return Mode::Quantitative;
  throw std::invalid_argument("unknown mode '" + std::string(s) + "'");
}

SpecRewardPair::SpecRewardPair(Formula formula, double weight, Mode mode)
    : formula_(std::move(formula)), weight_(weight), mode_(mode), safety_(is_safe(formula_)) {}

SpecRewardPair::SpecRewardPair(std::string_view formula, double weight, Mode mode)
    : SpecRewardPair(parse(formula), weight, mode) {}

CompositeMonitor::CompositeMonitor(std::vector<SpecRewardPair> pairs, double zeta,
                                   std::vector<std::string> universe, double veto_threshold)
    : pairs_(std::move(pairs)), zeta_(zeta), veto_threshold_(veto_threshold), universe_(std::move(universe)) {
  if (pairs_.empty()) throw ComposeError("empty specification bundle");
  if (zeta_ > 0) throw ComposeError("zeta must be <= 0");
  SynthCache cache;
  for (const auto& p : pairs_) {
    Component c;
    std::vector<std::string> atoms;
    if (p.mode() == Mode::Quantitative) {
      auto m = synth(p.formula(), cache);
      m.weight = p.weight();
      atoms = m.atoms;
      c.qrm = std::make_shared<const Qrm>(std::move(m));
    } else {
      c.brm = brm_build(p.formula(), p.weight());
      atoms = c.brm->atoms();
    }
    for (const auto& a : atoms) {
      auto it = std::find(universe_.begin(), universe_.end(), a);
      if (it == universe_.end())
        throw ComposeError("atom '" + a + "' of " + to_string(p.formula()) + " is not in the label universe");
      c.slots.push_back(static_cast<std::uint32_t>(it - universe_.begin()));
    }
    components_.push_back(std::move(c));
  }
}

const Qrm* CompositeMonitor::qrm(std::size_t i) const { return components_.at(i).qrm.get(); }

const BooleanMonitor* CompositeMonitor::brm(std::size_t i) const { return components_.at(i).brm.get(); }

void CompositeMonitor::gather(const Component& c, std::span<const double> labels,
                              std::vector<double>& out) const {
  if (labels.size() != universe_.size())
    throw MissingLabel("expected " + std::to_string(universe_.size()) + " labels, got " +
                       std::to_string(labels.size()));
  out.resize(c.slots.size());
  for (std::size_t k = 0; k < c.slots.size(); ++k) out[k] = labels[c.slots[k]];
}

double CompositeMonitor::start(CompositeState& st, std::span<const double> boolean_labels,
                               std::span<const double> quant_labels) const {
  st.quant.assign(components_.size(), MonitorState{});
  st.q.assign(components_.size(), 0);
  st.violated = false;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const auto& c = components_[i];
    if (c.qrm) {
      gather(c, quant_labels, st.scratch);
      st.quant[i] = init(*c.qrm, st.scratch);
      st.q[i] = st.quant[i].q;
    } else {
      gather(c, boolean_labels, st.scratch);
      st.q[i] = c.brm->step(c.brm->start(), st.scratch);
    }
  }
  st.started = true;
  return settle(st);
}

double CompositeMonitor::step(CompositeState& st, std::span<const double> boolean_labels,
                              std::span<const double> quant_labels) const {
  if (!st.started) return start(st, boolean_labels, quant_labels);
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const auto& c = components_[i];
    if (c.qrm) {
      gather(c, quant_labels, st.scratch);
      qmon::step(*c.qrm, st.quant[i], st.scratch);
      st.q[i] = st.quant[i].q;
    } else {
      gather(c, boolean_labels, st.scratch);
      st.q[i] = c.brm->step(st.q[i], st.scratch);
    }
  }
  return settle(st);
}

double CompositeMonitor::component_reward(const CompositeState& st, std::size_t i) const {
  const auto& c = components_.at(i);
  if (c.qrm) return reward(st.quant.at(i), *c.qrm);
  return c.brm->output(st.q.at(i)) * c.brm->weight();
}

bool CompositeMonitor::component_violated(const CompositeState& st, std::size_t i) const {
  if (!pairs_.at(i).safety()) return false;
  const auto& c = components_[i];
  if (c.qrm) return reward_value(st.quant.at(i), *c.qrm) <= veto_threshold_;
  return c.brm->is_bottom(st.q.at(i));
}

double CompositeMonitor::settle(CompositeState& st) const {
  double total = 0.0;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    if (component_violated(st, i)) st.violated = true;
    total += component_reward(st, i);
  }
  st.last_reward = st.violated ? zeta_ : total;
  return st.last_reward;
}

std::shared_ptr<const CompositeMonitor> compose(std::vector<SpecRewardPair> pairs, double zeta,
                                                std::vector<std::string> universe) {
  return std::make_shared<const CompositeMonitor>(std::move(pairs), zeta, std::move(universe));
}

std::shared_ptr<const CompositeMonitor> compose(std::vector<SpecRewardPair> pairs, double zeta,
                                                std::vector<std::string> universe, Mode mode) {
  std::vector<SpecRewardPair> forced;
  for (const auto& p : pairs) forced.emplace_back(p.formula(), p.weight(), mode);
  return compose(std::move(forced), zeta, std::move(universe));
}

double composite_step(const CompositeMonitor& cm, CompositeState& st,
                      const std::map<std::string, double>& boolean_labels,
                      const std::map<std::string, double>& quant_labels) {
  const auto b = labels_for(cm.universe(), boolean_labels);
  const auto q = labels_for(cm.universe(), quant_labels);
  return st.started ? cm.step(st, b, q) : cm.start(st, b, q);
}

}  // namespace qmon
