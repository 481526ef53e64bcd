#include "qmon/learn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace qmon {

void QLearnConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
  if (!(epsilon_min >= 0.0 && epsilon_min <= epsilon0 && epsilon0 <= 1.0))
    throw std::invalid_argument("need 0 <= epsilon_min <= epsilon0 <= 1");
  if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0)) throw std::invalid_argument("epsilon_decay must lie in (0, 1]");
  if (max_steps == 0) throw std::invalid_argument("max_steps must be positive");
}

double QLearnConfig::epsilon(std::size_t episode) const {
  return std::max(epsilon_min, epsilon0 * std::pow(epsilon_decay, static_cast<double>(episode)));
}

std::size_t QTable::TupleHash::operator()(const std::vector<std::uint32_t>& v) const {
  std::size_t h = 0xcbf29ce484222325ULL;
  for (auto x : v) h = (h ^ x) * 0x100000001b3ULL;
  return h;
}

QTable::QTable(std::uint32_t num_env_states, std::uint32_t num_actions)
    : states_(num_env_states), actions_(num_actions) {
  if (num_actions == 0) throw std::invalid_argument("QTable needs at least one action");
}

std::uint64_t QTable::key(std::uint32_t env_state, std::span<const std::uint32_t> tuple) {
  thread_local std::vector<std::uint32_t> probe;
  probe.assign(tuple.begin(), tuple.end());
  auto it = tuples_.find(probe);
  std::uint32_t id;
  if (it != tuples_.end()) {
    id = it->second;
  } else {
    id = static_cast<std::uint32_t>(tuples_.size());
    tuples_.emplace(probe, id);
    values_.resize(values_.size() + static_cast<std::size_t>(states_) * actions_, 0.0);
  }
  return static_cast<std::uint64_t>(id) * states_ + env_state;
}

std::span<double> QTable::row(std::uint64_t key) {
  return {values_.data() + key * actions_, actions_};
}

std::span<const double> QTable::row(std::uint64_t key) const {
  return {values_.data() + key * actions_, actions_};
}

double QTable::max(std::uint64_t key) const {
  auto r = row(key);
  return *std::max_element(r.begin(), r.end());
}

std::uint32_t QTable::argmax(std::uint64_t key) const {
  auto r = row(key);
  return static_cast<std::uint32_t>(std::max_element(r.begin(), r.end()) - r.begin());
}

void q_update(QTable& q, std::uint64_t s, std::uint32_t a, double r, std::uint64_t s2, bool terminal,
              const QLearnConfig& cfg) {
  const double next = terminal ? 0.0 : q.max(s2);
  double& v = q.row(s)[a];
  v += cfg.alpha * (r + cfg.gamma * next - v);
}

EmaConvergence::EmaConvergence(EmaConfig cfg)
    : cfg_(std::move(cfg)), beta_(1.0 - 2.0 / (static_cast<double>(cfg_.span) + 1.0)) {
  if (cfg_.span == 0 || cfg_.pairs == 0) throw std::invalid_argument("span and pairs must be positive");
  if (!(cfg_.tau_min <= cfg_.tau_max)) throw std::invalid_argument("tau_min must not exceed tau_max");
}

std::optional<std::size_t> EmaConvergence::push(double episode_return) {
  const double prev = count_ == 0 ? cfg_.initial.value_or(episode_return) : value_;
  value_ = beta_ * prev + (1.0 - beta_) * episode_return;
  ++count_;
  if (count_ % cfg_.span == 0) {
    checkpoints_.push_back(value_);
    if (!converged_ && check()) converged_ = count_;
  }
  return converged_;
}

bool EmaConvergence::check() {
  const std::size_t n = checkpoints_.size();
  if (n < cfg_.pairs + 1) return false;
  std::vector<double> deltas;
  for (std::size_t i = n - cfg_.pairs; i < n; ++i) deltas.push_back(checkpoints_[i] - checkpoints_[i - 1]);
  const double mean = std::accumulate(deltas.begin(), deltas.end(), 0.0) / static_cast<double>(deltas.size());
  double var = 0.0;
  for (double d : deltas) var += (d - mean) * (d - mean);
  const double sd = std::sqrt(var / static_cast<double>(deltas.size()));
  tau_ = std::clamp(sd / std::max(std::abs(checkpoints_.back()), cfg_.scale_floor), cfg_.tau_min, cfg_.tau_max);
  for (std::size_t i = n - cfg_.pairs; i < n; ++i) {
    const double scale = std::max(std::abs(checkpoints_[i - 1]), cfg_.scale_floor);
    if (std::abs(checkpoints_[i] - checkpoints_[i - 1]) > tau_ * scale) return false;
  }
  return true;
}

double RunResult::final_completion(std::size_t window) const {
  if (episodes.empty()) return 0.0;
  const std::size_t n = std::min(window, episodes.size());
  double sum = 0.0;
  for (std::size_t i = episodes.size() - n; i < episodes.size(); ++i) sum += episodes[i].completion;
  return sum / static_cast<double>(n);
}

RunResult train(const LabelledMdp& env, const CompositeMonitor* cm, const QLearnConfig& cfg, const EmaConfig& ema,
                Variant variant) {
  cfg.validate();
  if (cm && cm->universe() != env.atoms())
    throw std::invalid_argument("monitor atoms do not match the environment's labels");
  RunResult result;
  result.variant = variant;
  result.seed = cfg.seed;
  result.episodes.reserve(cfg.episodes);

  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::uint32_t> any_action(0, env.num_actions() - 1);
  QTable q(env.num_states(), env.num_actions());
  EmaConvergence detector(ema);
  CompositeState st;
  const std::vector<std::uint32_t> no_tuple;
  auto tuple = [&]() -> std::span<const std::uint32_t> { return cm ? std::span(st.q) : std::span(no_tuple); };

  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t horizon = std::min(cfg.max_steps, env.horizon());
  for (std::size_t e = 0; e < cfg.episodes; ++e) {
    const double eps = cfg.epsilon(e);
    std::uint32_t s = env.reset(rng);
    if (cm) product_start(env, s, *cm, st);
    std::uint64_t key = q.key(s, tuple());
    double ret = 0.0;
    std::size_t steps = 0;
    bool done = false;
    while (!done && steps < horizon) {
      const std::uint32_t a = coin(rng) < eps ? any_action(rng) : q.argmax(key);
      const ProductStep ps = product_step(env, s, a, cm, st, rng);
      const std::uint64_t key2 = q.key(ps.next, tuple());
      q_update(q, key, a, ps.reward, key2, ps.done, cfg);
      ret += ps.reward;
      s = ps.next;
      key = key2;
      done = ps.done;
      ++steps;
    }
    result.episodes.push_back({ret, task_completion(env, s, true), eps, steps});
    const bool was = detector.converged_at().has_value();
    if (detector.push(ret) && !was) {
      result.converged_episode = detector.converged_at();
      result.converged_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  }
  result.product_tuples = q.num_tuples();
  return result;
}

}  // namespace qmon
