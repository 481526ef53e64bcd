#include "qmon/check.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>

#include "qmon/compose.hpp"
#include "qmon/fuzz.hpp"
#include "qmon/monitor.hpp"

namespace qmon {

std::string_view suite_name(Suite s) {
  switch (s) {
    case Suite::Oracle: return "oracle";
    case Suite::Linearity: return "linearity";
    case Suite::Crisp: return "crisp";
    case Suite::Veto: return "veto";
  }
  return "?";
}

Suite parse_suite(std::string_view s) {
  for (Suite x : {Suite::Oracle, Suite::Linearity, Suite::Crisp, Suite::Veto})
    if (suite_name(x) == s) return x;
  throw std::invalid_argument("unknown suite '" + std::string(s) + "' (oracle, linearity, crisp, veto)");
}

std::string CheckReport::summary() const {
  std::ostringstream os;
  os << suite_name(suite) << ": " << (passed() ? "PASS" : "FAIL") << " seed=" << seed << " cases=" << cases
     << " checks=" << checks << " failures=" << failures << " worst=" << worst << " time=" << seconds << "s";
  if (counterexample) {
    const auto& c = *counterexample;
    os << "\n  formula: " << to_string(c.formula);
    if (!c.trace.empty()) {
      os << "\n  trace (" << c.trace.size() << " steps, first divergence at " << c.index << "):";
      for (std::size_t i = 1; i <= c.trace.size(); ++i) {
        os << "\n   ";
        for (std::size_t a = 0; a < c.trace.atoms().size(); ++a)
          os << ' ' << c.trace.atoms()[a] << '=' << c.trace.value(i, a);
      }
    }
    if (!c.detail.empty()) os << "\n  " << c.detail;
  }
  return os.str();
}

namespace {

// Labels of trace row i in the order `order` expects.
std::vector<double> row_for(const Trace& t, std::size_t i, const std::vector<std::string>& order) {
  std::vector<double> out;
  out.reserve(order.size());
  for (const auto& a : order) {
    auto k = t.atom_index(a);
    if (!k) throw MissingLabel("trace has no atom " + a);
    out.push_back(t.value(i, *k));
  }
  return out;
}

Formula rebuild(const Formula& f, std::vector<Formula> c) {
  switch (f.op()) {
    case Op::Not: return Formula::negation(c[0]);
    case Op::Next: return Formula::next(c[0]);
    case Op::Eventually: return Formula::eventually(c[0]);
    case Op::Always: return Formula::always(c[0]);
    case Op::And: return Formula::conj(c[0], c[1]);
    case Op::Or: return Formula::disj(c[0], c[1]);
    case Op::Until: return Formula::until(c[0], c[1]);
    case Op::Release: return Formula::release(c[0], c[1]);
    default: return f;
  }
}

// Every formula obtained from f by one local simplification.
void mutations(const Formula& f, std::vector<Formula>& out) {
  if (f.arity() == 0) {
    if (f.op() == Op::Atom) {
      out.push_back(Formula::top());
      out.push_back(Formula::bottom());
    }
    return;
  }
  for (std::size_t i = 0; i < f.arity(); ++i) out.push_back(f.child(i));
  out.push_back(Formula::top());
  out.push_back(Formula::bottom());
  for (std::size_t i = 0; i < f.arity(); ++i) {
    std::vector<Formula> sub;
    mutations(f.child(i), sub);
    for (auto& s : sub) {
      std::vector<Formula> kids;
      for (std::size_t j = 0; j < f.arity(); ++j) kids.push_back(j == i ? s : f.child(j));
      out.push_back(rebuild(f, std::move(kids)));
    }
  }
}

Trace without(const Trace& t, std::size_t drop) {
  Trace out(t.atoms());
  for (std::size_t i = 1; i <= t.size(); ++i)
    if (i != drop) out.push(std::vector<double>(t.row(i).begin(), t.row(i).end()));
  return out;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

const std::vector<std::string> kAtoms{"a", "b", "c", "d"};

// Random traces of length 1..max_len stepped through one batch. `compare` is
// called for every lane and step that lies inside the lane's trace.
template <class Compare>
void run_lanes(const std::shared_ptr<const Qrm>& m, const std::vector<Trace>& traces, LaneKernel kernel,
               Compare&& compare) {
  std::size_t longest = 0;
  for (const auto& t : traces) longest = std::max(longest, t.size());
  std::vector<std::size_t> slot;
  for (const auto& a : m->atoms) slot.push_back(*traces.front().atom_index(a));
  LaneBatch batch(m, traces.size(), kernel);
  std::vector<double> labels(m->atoms.size() * traces.size());
  for (std::size_t i = 1; i <= longest; ++i) {
    for (std::size_t a = 0; a < slot.size(); ++a)
      for (std::size_t l = 0; l < traces.size(); ++l)
        labels[a * traces.size() + l] = i <= traces[l].size() ? traces[l].value(i, slot[a]) : 0.0;
    batch.step(labels);
    for (std::size_t l = 0; l < traces.size(); ++l)
      if (i <= traces[l].size() && !compare(l, i, batch.reward_value(l))) return;
  }
}

std::vector<Trace> random_traces(std::mt19937_64& rng, const CheckOptions& opts, int grid) {
  std::uniform_int_distribution<std::size_t> len(1, opts.max_trace_length);
  std::vector<Trace> out;
  for (std::size_t k = 0; k < opts.traces; ++k) out.push_back(random_trace(rng, kAtoms, len(rng), grid));
  return out;
}

CheckReport oracle_suite(const CheckOptions& opts) {
  CheckReport rep;
  std::mt19937_64 rng(opts.seed);
  FormulaGen gen;
  gen.atoms = kAtoms;
  SynthCache cache;
  const std::size_t n = opts.formulas ? opts.formulas : 1000;
  for (std::size_t k = 0; k < n; ++k) {
    const Formula f = random_formula(rng, gen);
    const auto traces = random_traces(rng, opts, 5);
    auto m = std::make_shared<const Qrm>(synth(f, cache));
    ++rep.cases;
    if (!m->exact) {
      ++rep.failures;
      if (!rep.counterexample) rep.counterexample = Counterexample{f, {}, 0, "monitor fell back to the inexact construction"};
      continue;
    }
    run_lanes(m, traces, opts.kernel, [&](std::size_t l, std::size_t i, double got) {
      ++rep.checks;
      const double want = evaluate(f, traces[l].prefix(i), 1);
      const double err = std::abs(got - want);
      rep.worst = std::max(rep.worst, err);
      if (err <= opts.tolerance) return true;
      ++rep.failures;
      if (!rep.counterexample) {
        const double tol = opts.tolerance;
        rep.counterexample = shrink(f, traces[l].prefix(i), [tol](const Formula& g, const Trace& t) {
          return oracle_divergence(g, t, tol);
        });
      }
      return false;
    });
  }
  return rep;
}

CheckReport linearity_suite(const CheckOptions& opts) {
  CheckReport rep;
  std::mt19937_64 rng(opts.seed);
  FormulaGen gen;
  gen.atoms = kAtoms;
  gen.max_depth = 8;
  gen.leaf_bias = 0.15;
  gen.max_size = 60;
  const double bound = opts.linearity_bound;
  auto ratio = [](const Formula& f) {
    return static_cast<double>(synth(f).num_states()) / static_cast<double>(size(f));
  };
  const std::size_t n = opts.formulas ? opts.formulas : 10000;
  for (std::size_t k = 0; k < n; ++k) {
    const Formula f = random_formula(rng, gen);
    ++rep.cases;
    ++rep.checks;
    const double r = ratio(f);
    rep.worst = std::max(rep.worst, r);
    if (r > bound) {
      ++rep.failures;
      if (!rep.counterexample) {
        rep.counterexample = shrink(f, Trace(kAtoms), [&](const Formula& g, const Trace&) {
          return ratio(g) > bound ? std::optional<std::size_t>(0) : std::nullopt;
        });
        std::ostringstream os;
        os << "states/size = " << ratio(rep.counterexample->formula) << " > " << bound;
        rep.counterexample->detail = os.str();
      }
    }
  }
  return rep;
}

CheckReport crisp_suite(const CheckOptions& opts) {
  CheckReport rep;
  std::mt19937_64 rng(opts.seed);
  FormulaGen gen;
  gen.atoms = kAtoms;
  SynthCache cache;
  const std::size_t n = opts.formulas ? opts.formulas : 500;
  for (std::size_t k = 0; k < n; ++k) {
    const Formula f = random_formula(rng, gen);
    const auto traces = random_traces(rng, opts, 2);
    auto m = std::make_shared<const Qrm>(synth(f, cache));
    const BooleanMonitor bm(f);
    std::vector<std::uint32_t> q(traces.size(), bm.start());
    ++rep.cases;
    run_lanes(m, traces, opts.kernel, [&](std::size_t l, std::size_t i, double got) {
      ++rep.checks;
      q[l] = bm.step(q[l], row_for(traces[l], i, bm.atoms()));
      const double want = bm.output(q[l]);
      const double err = std::min(std::abs(got), std::abs(got - 1.0)) + std::abs(std::round(got) - want);
      rep.worst = std::max(rep.worst, std::abs(got - want));
      if (err <= 1e-9) return true;
      ++rep.failures;
      if (!rep.counterexample) rep.counterexample = shrink(f, traces[l].prefix(i), crisp_divergence);
      return false;
    });
  }
  return rep;
}

Formula random_safe(std::mt19937_64& rng, const FormulaGen& gen) {
  for (;;) {
    Formula f = random_formula(rng, gen);
    if (is_safe(f)) return f;
  }
}

CheckReport veto_suite(const CheckOptions& opts) {
  CheckReport rep;
  std::mt19937_64 rng(opts.seed);
  FormulaGen gen;
  gen.atoms = kAtoms;
  gen.max_depth = 4;
  std::uniform_int_distribution<int> extra(0, 3);
  std::uniform_int_distribution<int> weight(-10, 10);
  std::bernoulli_distribution boolean(0.5);
  std::size_t violations = 0;
  const std::size_t n = opts.formulas ? opts.formulas : 500;
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<SpecRewardPair> pairs;
    const Formula safe = random_safe(rng, gen);
    pairs.emplace_back(safe, weight(rng), boolean(rng) ? Mode::Boolean : Mode::Quantitative);
    for (int e = extra(rng); e > 0; --e)
      pairs.emplace_back(random_formula(rng, gen), weight(rng), boolean(rng) ? Mode::Boolean : Mode::Quantitative);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    std::vector<std::pair<Trace, Trace>> traces;  // (crisp, quantitative)
    std::uniform_int_distribution<std::size_t> len(1, opts.max_trace_length);
    for (std::size_t t = 0; t < opts.traces; ++t) {
      const std::size_t L = len(rng);
      Trace crisp = random_trace(rng, kAtoms, L, 2);
      traces.emplace_back(std::move(crisp), random_trace(rng, kAtoms, L, 5));
    }
    ++rep.cases;
    for (double zeta : opts.zetas) {
      const CompositeMonitor cm(pairs, zeta, kAtoms);
      for (const auto& [crisp, fuzzy] : traces) {
        CompositeState st;
        bool latched = false;
        for (std::size_t i = 1; i <= crisp.size(); ++i) {
          const double r = cm.step(st, crisp.row(i), fuzzy.row(i));
          double sum = 0.0;
          for (std::size_t c = 0; c < cm.size(); ++c) {
            sum += cm.component_reward(st, c);
            if (!cm.pair(c).safety()) continue;
            // Quantitative safety components are judged by the oracle.
            const bool bad = cm.pair(c).mode() == Mode::Quantitative
                                 ? evaluate(cm.pair(c).formula(), fuzzy.prefix(i), 1) <= cm.veto_threshold()
                                 : cm.component_violated(st, c);
            latched = latched || bad;
          }
          ++rep.checks;
          const double want = latched ? zeta : sum;
          const double err = std::abs(r - want);
          rep.worst = std::max(rep.worst, err);
          if (latched) ++violations;
          if (err <= opts.tolerance && st.violated == latched) continue;
          ++rep.failures;
          if (!rep.counterexample) {
            std::ostringstream os;
            os << "zeta=" << zeta << " step " << i << ": reward " << r << ", expected " << want << " (latched "
               << latched << ", monitor " << st.violated << "); bundle:";
            for (std::size_t c = 0; c < cm.size(); ++c)
              os << " [" << to_string(cm.pair(c).formula()) << ", " << cm.pair(c).weight() << ", "
                 << mode_name(cm.pair(c).mode()) << (cm.pair(c).safety() ? ", safe" : "") << "]";
            rep.counterexample = Counterexample{safe, fuzzy.prefix(i), i, os.str()};
          }
          break;
        }
      }
    }
  }
  // A suite that never sees a violation checks nothing about the latch.
  if (violations == 0) {
    ++rep.failures;
    if (!rep.counterexample) rep.counterexample = Counterexample{Formula::top(), {}, 0, "no violation was exercised"};
  }
  return rep;
}

}  // namespace

std::optional<std::size_t> oracle_divergence(const Formula& f, const Trace& trace, double tolerance) {
  const Qrm m = synth(f);
  MonitorState ms;
  for (std::size_t i = 1; i <= trace.size(); ++i) {
    const auto labels = row_for(trace, i, m.atoms);
    if (i == 1)
      ms = init(m, labels);
    else
      step(m, ms, labels);
    if (std::abs(reward_value(ms, m) - evaluate(f, trace.prefix(i), 1)) > tolerance) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> crisp_divergence(const Formula& f, const Trace& trace) {
  const Qrm m = synth(f);
  const BooleanMonitor bm(f);
  std::uint32_t q = bm.start();
  MonitorState ms;
  for (std::size_t i = 1; i <= trace.size(); ++i) {
    const auto labels = row_for(trace, i, m.atoms);
    if (i == 1)
      ms = init(m, labels);
    else
      step(m, ms, labels);
    q = bm.step(q, row_for(trace, i, bm.atoms()));
    const double v = reward_value(ms, m);
    if ((v != 0.0 && v != 1.0) || v != bm.output(q)) return i;
  }
  return std::nullopt;
}

Counterexample shrink(Formula f, Trace trace, const Divergence& diverges) {
  auto at = diverges(f, trace);
  if (!at) return {f, trace, 0, "does not diverge"};
  for (bool progress = true; progress;) {
    progress = false;
    if (*at >= 1 && *at < trace.size()) {
      trace = trace.prefix(*at);
      progress = true;
    }
    for (std::size_t drop = 1; drop <= trace.size() && trace.size() > 1; ++drop) {
      Trace t = without(trace, drop);
      if (auto d = diverges(f, t)) {
        trace = std::move(t);
        at = d;
        progress = true;
        --drop;
      }
    }
    std::vector<Formula> cands;
    mutations(f, cands);
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Formula& a, const Formula& b) { return size(a) < size(b); });
    for (const auto& g : cands) {
      if (size(g) >= size(f)) break;
      if (auto d = diverges(g, trace)) {
        f = g;
        at = d;
        progress = true;
        break;
      }
    }
  }
  return {f, trace, *at, {}};
}

CheckReport run_check(Suite suite, const CheckOptions& opts) {
  const auto t0 = Clock::now();
  CheckReport rep;
  switch (suite) {
    case Suite::Oracle: rep = oracle_suite(opts); break;
    case Suite::Linearity: rep = linearity_suite(opts); break;
    case Suite::Crisp: rep = crisp_suite(opts); break;
    case Suite::Veto: rep = veto_suite(opts); break;
  }
  rep.suite = suite;
  rep.seed = opts.seed;
  rep.seconds = seconds_since(t0);
  return rep;
}

}  // namespace qmon
