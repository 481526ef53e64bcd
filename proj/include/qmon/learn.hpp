#pragma once

// Tabular epsilon-greedy Q-learning over environment x monitor product
// states, with EMA-based reward convergence detection.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "qmon/compose.hpp"
#include "qmon/envs.hpp"

namespace qmon {

struct QLearnConfig {
  double alpha = 0.01;
  double gamma = 0.9;
  double epsilon0 = 1.0;
  double epsilon_decay = 0.9985;
  double epsilon_min = 0.05;
  std::size_t episodes = 2000;
  std::size_t max_steps = 100;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument.
  void validate() const;
  // max(epsilon_min, epsilon0 * decay^e) for 0-based episode e.
  double epsilon(std::size_t episode) const;
};

// Q(s, a) over product states (environment state, monitor state tuple).
// Tuples are interned on first sight; unseen entries read as 0.
class QTable {
 public:
  QTable(std::uint32_t num_env_states, std::uint32_t num_actions);

  std::uint32_t num_actions() const { return actions_; }
  std::size_t num_tuples() const { return tuples_.size(); }

  // Dense key of (env state, tuple), allocating the tuple if new.
  std::uint64_t key(std::uint32_t env_state, std::span<const std::uint32_t> tuple);
  std::span<double> row(std::uint64_t key);
  std::span<const double> row(std::uint64_t key) const;
  double max(std::uint64_t key) const;
  // Lowest action index among the maxima.
  std::uint32_t argmax(std::uint64_t key) const;

 private:
  struct TupleHash {
    std::size_t operator()(const std::vector<std::uint32_t>& v) const;
  };
  std::uint32_t states_;
  std::uint32_t actions_;
  std::unordered_map<std::vector<std::uint32_t>, std::uint32_t, TupleHash> tuples_;
  std::vector<double> values_;
};

// Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a)); the max term is 0
// when s' is terminal.
void q_update(QTable& q, std::uint64_t s, std::uint32_t a, double r, std::uint64_t s2, bool terminal,
              const QLearnConfig& cfg);

struct EmaConfig {
  std::size_t span = 32;   // N; also the checkpoint interval
  std::size_t pairs = 5;   // P
  double tau_min = 0.002;
  double tau_max = 0.02;
  double scale_floor = 1.0;
  // E_0. When unset, the first return seeds the average.
  std::optional<double> initial;
};

class EmaConvergence {
 public:
  explicit EmaConvergence(EmaConfig cfg = {});

  double beta() const { return beta_; }
  // Feeds the next episode return; returns the converged-at episode (1-based)
  // once convergence has been declared.
  std::optional<std::size_t> push(double episode_return);

  double value() const { return value_; }
  std::size_t episodes() const { return count_; }
  const std::vector<double>& checkpoints() const { return checkpoints_; }
  std::optional<std::size_t> converged_at() const { return converged_; }
  // Tolerance used at the most recent checkpoint.
  double tau() const { return tau_; }

 private:
  bool check() ;

  EmaConfig cfg_;
  double beta_;
  double value_ = 0.0;
  std::size_t count_ = 0;
  double tau_ = 0.0;
  std::vector<double> checkpoints_;
  std::optional<std::size_t> converged_;
};

struct EpisodeRecord {
  double ret;
  double completion;
  double epsilon;
  std::size_t steps;
};

struct RunResult {
  Variant variant = Variant::Base;
  std::uint64_t seed = 0;
  std::vector<EpisodeRecord> episodes;
  std::optional<std::size_t> converged_episode;
  std::optional<double> converged_seconds;
  std::size_t product_tuples = 0;

  // Mean task completion over the last `window` episodes (all if fewer).
  double final_completion(std::size_t window = 100) const;
};

// Trains on env with the bundle's reward (environment reward when cm is
// null). Deterministic for a given cfg.seed.
RunResult train(const LabelledMdp& env, const CompositeMonitor* cm, const QLearnConfig& cfg,
                const EmaConfig& ema = {}, Variant variant = Variant::Base);

}  // namespace qmon
