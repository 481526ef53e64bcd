// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion
// numbers as arguments to run a subset, e.g. `acceptance 1 8`.
//
// Exit status is the number of failed criteria (capped at 9).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "qmon/check.hpp"
#include "qmon/experiment.hpp"

using namespace qmon;

namespace {

// Pinned tolerances.
constexpr double kOracleTolerance = 1e-9;
constexpr double kSuiteSeconds = 60.0;
constexpr double kLinearityBound = 2.0;
constexpr double kBand = 0.05;  // +-5 percentage points
constexpr double kOrderSlack = 0.01;
constexpr double kClosedForm = 1e-12;
constexpr double kConveyorGap = 0.15;
constexpr std::size_t kEpisodes = 2000;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string pct(double x) { return fmt("%.2f%%", 100.0 * x); }

std::string episode(const std::optional<double>& e) { return e ? fmt("%.1f", *e) : "None"; }

bool within(double x, double target, double band = kBand) { return std::abs(x - target) <= band; }

std::size_t workers() { return std::max(1u, std::thread::hardware_concurrency()); }

struct Table {
  SummaryRow base, boolean, quant;
};

Table table(const std::string& env, std::size_t runs, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.environment = env;
  cfg.runs = runs;
  cfg.seed = seed;
  cfg.workers = workers();
  cfg.qlearning.episodes = kEpisodes;
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = run_experiment(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Table t;
  for (const auto& row : res.summary) {
    if (row.variant == Variant::Base) t.base = row;
    if (row.variant == Variant::Boolean) t.boolean = row;
    if (row.variant == Variant::Quantitative) t.quant = row;
  }
  std::fprintf(stderr, "  %s: %zu runs x 3 variants in %.1f s\n", env.c_str(), runs, secs);
  for (const auto* r : {&t.base, &t.boolean, &t.quant})
    std::fprintf(stderr, "    %-12s completion %6.2f%% +- %.2f, converged %zu/%zu, mean episode %s\n",
                 std::string(variant_name(r->variant)).c_str(), 100 * r->completion_mean, 100 * r->completion_ci95,
                 r->converged_runs, r->runs, episode(r->mean_episode).c_str());
  return t;
}

std::string completions(const Table& t) {
  return "completion base " + pct(t.base.completion_mean) + ", boolean " + pct(t.boolean.completion_mean) +
         ", quantitative " + pct(t.quant.completion_mean);
}

Outcome suite(Suite s, const std::function<bool(const CheckReport&)>& extra = {}) {
  CheckOptions o;
  o.tolerance = kOracleTolerance;
  o.linearity_bound = kLinearityBound;
  const auto rep = run_check(s, o);
  const bool pass = rep.passed() && (!extra || extra(rep));
  return {pass, rep.summary()};
}

Outcome c1() {
  return suite(Suite::Oracle, [](const CheckReport& r) { return r.cases == 1000 && r.seconds < kSuiteSeconds; });
}

Outcome c2() {
  return suite(Suite::Linearity, [](const CheckReport& r) {
    return r.cases == 10000 && r.worst <= kLinearityBound && r.seconds < kSuiteSeconds;
  });
}

Outcome c3() {
  return suite(Suite::Crisp, [](const CheckReport& r) { return r.cases == 500; });
}

Outcome c4() {
  return suite(Suite::Veto, [](const CheckReport& r) { return r.cases == 500; });
}

Outcome c5() {
  const Table t = table("cliff_walking", 50, 5000);
  const auto& q = t.quant.mean_episode;
  const auto& b = t.base.mean_episode;
  const auto& bo = t.boolean.mean_episode;
  const bool order = q && b && bo && *q < *b && *b < *bo;
  const bool fast = q && *q <= 10.0;
  bool band = true;
  for (const auto* r : {&t.base, &t.boolean, &t.quant})
    band = band && r->completion_mean >= 0.844 - kBand && r->completion_mean <= 0.853 + kBand;
  std::string d = "convergence quantitative " + episode(q) + " < base " + episode(b) + " < boolean " + episode(bo) +
                  (order ? "" : " (violated)") + "; quantitative <= 10: " + (fast ? "yes" : "no") + "; " +
                  completions(t) + (band ? "" : " (outside 84.4-85.3% +-5pp)");
  return {order && fast && band, d};
}

Outcome c6() {
  const Table t = table("frozen_lake", 100, 6000);
  const bool bool_band = within(t.boolean.completion_mean, 0.6216);
  const bool base_band = within(t.base.completion_mean, 0.59);
  const bool quant_band = within(t.quant.completion_mean, 0.59);
  const auto& bo = t.boolean.mean_episode;
  const auto& q = t.quant.mean_episode;
  const bool later = bo && q && *bo > *q;
  const bool higher = t.boolean.completion_mean >= t.quant.completion_mean;
  std::string d = completions(t) + " (bands: boolean " + (bool_band ? "ok" : "miss") + ", base " +
                  (base_band ? "ok" : "miss") + ", quantitative " + (quant_band ? "ok" : "miss") +
                  "); convergence boolean " + episode(bo) + " vs quantitative " + episode(q) +
                  (later ? "" : " (boolean not later)") + (higher ? "" : "; boolean completion below quantitative");
  return {bool_band && base_band && quant_band && later && higher, d};
}

Outcome c7() {
  struct Target {
    const char* env;
    std::size_t runs;
    double base, boolean, quant;
  };
  bool pass = true;
  std::string d;
  {
    const Target s{"sokoban", 200, 0.5023, 0.5200, 0.5315};
    const Table t = table(s.env, s.runs, 7000);
    const bool order = t.quant.completion_mean >= t.boolean.completion_mean - kOrderSlack &&
                       t.boolean.completion_mean >= t.base.completion_mean - kOrderSlack;
    const bool bands = within(t.base.completion_mean, s.base) && within(t.boolean.completion_mean, s.boolean) &&
                       within(t.quant.completion_mean, s.quant);
    pass = pass && order && bands;
    d += std::string("sokoban ") + completions(t) + (order ? "" : " (order violated)") +
         (bands ? "" : " (outside bands)");
  }
  for (const Target& s : {Target{"taxi", 200, 0.7119, 0.4650, 0.5276},
                          Target{"island_navigation", 200, 0.9681, 0.7637, 0.7672}}) {
    const Table t = table(s.env, s.runs, 7000);
    const bool order = t.base.completion_mean > t.quant.completion_mean &&
                       t.quant.completion_mean > t.boolean.completion_mean;
    const bool bands = within(t.base.completion_mean, s.base) && within(t.boolean.completion_mean, s.boolean) &&
                       within(t.quant.completion_mean, s.quant);
    pass = pass && order && bands;
    d += std::string("; ") + s.env + " " + completions(t) + (order ? "" : " (order violated)") +
         (bands ? "" : " (outside bands)");
  }
  return {pass, d};
}

Outcome c8() {
  EmaConvergence constant;
  std::optional<std::size_t> at;
  for (int e = 0; e < 10000 && !at; ++e) at = constant.push(5.0);
  const bool c192 = at && *at == 192;

  EmaConvergence alternating;
  std::optional<std::size_t> alt;
  for (int e = 0; e < 10000 && !alt; ++e) alt = alternating.push(e % 2 ? 1000.0 : -1000.0);

  EmaConfig cfg;
  cfg.initial = 0.0;
  EmaConvergence ema(cfg);
  const double beta = ema.beta();
  double closed_err = 0.0;
  std::vector<double> r;
  for (int k = 1; k <= 500; ++k) {
    r.push_back(100.0 * std::cos(0.7 * k) + 0.3 * k);
    ema.push(r.back());
    double closed = 0.0;
    for (int j = 1; j <= k; ++j) closed += (1.0 - beta) * std::pow(beta, k - j) * r[j - 1];
    closed_err = std::max(closed_err, std::abs(ema.value() - closed) / std::max(1.0, std::abs(closed)));
  }
  const bool closed_ok = closed_err <= kClosedForm;

  std::string d = "constant stream converged at " + (at ? std::to_string(*at) : std::string("None")) +
                  "; alternating +-1000 " +
                  (alt ? "converged at " + std::to_string(*alt) : std::string("never converged in 10000")) +
                  "; closed-form error " + fmt("%.3g", closed_err);
  return {c192 && !alt && closed_ok, d};
}

Outcome c9() {
  const Table t = table("conveyor_belt", 100, 9000);
  const double gap_b = t.base.completion_mean - t.boolean.completion_mean;
  const double gap_q = t.base.completion_mean - t.quant.completion_mean;
  return {gap_b >= kConveyorGap && gap_q >= kConveyorGap,
          completions(t) + "; gaps " + fmt("%.1fpp", 100 * gap_b) + " and " + fmt("%.1fpp", 100 * gap_q)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
      {"oracle equivalence", c1}, {"linear monitor size", c2},   {"crisp agreement", c3},
      {"safety veto", c4},        {"cliff walking", c5},         {"frozen lake", c6},
      {"gridworld orderings", c7}, {"convergence detector", c8}, {"conveyor belt", c9},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int n = static_cast<int>(k + 1);
    if (!only.empty() && !only.count(n)) continue;
    std::fprintf(stderr, "criterion %d (%s)...\n", n, criteria[k].first);
    const auto t0 = std::chrono::steady_clock::now();
    const Outcome o = criteria[k].second();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %d %s [%.1fs]: %s\n", o.pass ? "PASS" : "FAIL", n, criteria[k].first, secs, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return std::min(failed, 9);
}
