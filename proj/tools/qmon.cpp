// qmon: compile, evaluate, train and check reward monitors.
//
// Exit codes: 0 success, 1 property failure, 2 usage or input error.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <queue>
#include <sstream>
#include <string>

#include "qmon/check.hpp"
#include "qmon/experiment.hpp"
#include "qmon/monitor.hpp"
#include "qmon/semantics.hpp"

namespace fs = std::filesystem;
using namespace qmon;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Formula parse_or_report(const std::string& text) {
  try {
    return parse(text);
  } catch (const ParseError& e) {
    std::ostringstream os;
    os << "parse error: " << e.what() << "\n  " << text << "\n  "
       << std::string(e.column() - 1, ' ') << '^';
    throw UsageError(os.str());
  }
}

void write_file(const fs::path& p, const std::string& body) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p);
  if (!f) throw UsageError("cannot write " + p.string());
  f << body;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Reachable part of a Boolean monitor over every letter of its atoms.
std::string explore_brm(const BooleanMonitor& bm, std::size_t& states) {
  const std::size_t n = bm.atoms().size();
  if (n > 12) throw UsageError("too many atoms to enumerate the Boolean monitor (" + std::to_string(n) + ")");
  std::ostringstream dot;
  dot << "digraph brm {\n  rankdir=LR;\n  start [shape=point];\n  start -> s0;\n";
  std::map<std::uint32_t, bool> seen{{bm.start(), true}};
  std::queue<std::uint32_t> todo;
  todo.push(bm.start());
  while (!todo.empty()) {
    const auto q = todo.front();
    todo.pop();
    std::string label = bm.describe(q);
    for (auto& ch : label)
      if (ch == '"') ch = '\'';
    dot << "  s" << q << " [shape=" << (bm.output(q) ? "doublecircle" : "circle") << ", label=\"s" << q << "\\n"
        << label << "\"];\n";
    std::map<std::uint32_t, std::vector<std::uint64_t>> by_target;
    for (std::uint64_t letter = 0; letter < (std::uint64_t{1} << n); ++letter) {
      const auto t = bm.step(q, letter);
      by_target[t].push_back(letter);
      if (seen.emplace(t, true).second) todo.push(t);
    }
    for (const auto& [t, letters] : by_target) {
      std::string guard = letters.size() == (std::size_t{1} << n) ? "*" : "";
      if (guard.empty())
        for (auto l : letters) {
          if (!guard.empty()) guard += " | ";
          std::string word;
          for (std::size_t a = 0; a < n; ++a)
            word += (word.empty() ? "" : "&") + std::string((l >> a) & 1 ? "" : "!") + bm.atoms()[a];
          guard += n ? word : "true";
        }
      dot << "  s" << q << " -> s" << t << " [label=\"" << guard << "\"];\n";
    }
  }
  dot << "}\n";
  states = seen.size();
  return dot.str();
}

int cmd_compile(const std::string& text, Mode mode, const std::string& out) {
  const Formula f = parse_or_report(text);
  std::cout << "formula: " << to_string(f) << '\n';
  std::cout << "size: " << size(f) << '\n';
  std::cout << "safety: " << (is_safe(f) ? "true" : "false") << '\n';
  if (mode == Mode::Quantitative) {
    const Qrm m = synth(f);
    std::cout << "states: " << m.num_states() << '\n';
    std::cout << "registers: " << m.registers.size() << '\n';
    std::cout << "instructions: " << m.num_instructions() << '\n';
    std::cout << "exact: " << (m.exact ? "true" : "false") << '\n';
    if (!out.empty()) {
      write_file(fs::path(out) / "monitor.qrm", serialize(m));
      write_file(fs::path(out) / "monitor.dot", to_dot(m));
      std::cout << "wrote " << (fs::path(out) / "monitor.qrm").string() << " and monitor.dot\n";
    }
  } else {
    const BooleanMonitor bm(f);
    std::size_t states = 0;
    const std::string dot = explore_brm(bm, states);
    std::cout << "states: " << states << '\n';
    if (!out.empty()) {
      std::ostringstream art;
      art << "brm 1\nformula " << to_string(f) << "\natoms";
      for (const auto& a : bm.atoms()) art << ' ' << a;
      art << "\nstates " << states << '\n';
      for (std::uint32_t q = 0; q < states; ++q)
        art << "state s" << q << " output " << bm.output(q) << " : " << bm.describe(q) << '\n';
      write_file(fs::path(out) / "monitor.brm", art.str());
      write_file(fs::path(out) / "monitor.dot", dot);
      std::cout << "wrote " << (fs::path(out) / "monitor.brm").string() << " and monitor.dot\n";
    }
  }
  return kOk;
}

int cmd_eval(const std::string& text, const std::string& trace_file, Mode mode) {
  const Formula f = parse_or_report(text);
  Trace trace;
  try {
    trace = read_trace_file(trace_file);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  if (trace.empty()) throw UsageError("trace is empty");
  for (const auto& a : atoms(f))
    if (!trace.atom_index(a)) throw UsageError("trace has no atom '" + a + "'");
  std::size_t divergences = 0;
  std::cout << "step";
  if (mode == Mode::Quantitative) {
    const Qrm m = synth(f);
    for (const auto& r : m.registers) std::cout << '\t' << r.name;
    std::cout << "\treward\toracle\tdiverges\n";
    MonitorState ms;
    for (std::size_t i = 1; i <= trace.size(); ++i) {
      const auto labels = labels_for(m.atoms, trace.row_map(i));
      if (i == 1)
        ms = init(m, labels);
      else
        step(m, ms, labels);
      const double got = reward_value(ms, m);
      const double want = evaluate(f, trace.prefix(i), 1);
      const bool bad = std::abs(got - want) > 1e-9;
      divergences += bad;
      std::cout << i;
      for (double v : ms.values) std::cout << '\t' << fmt(v);
      std::cout << '\t' << fmt(got) << '\t' << fmt(want) << '\t' << (bad ? "YES" : "no") << '\n';
    }
  } else {
    if (!trace.is_crisp()) throw UsageError("boolean mode needs a crisp trace (labels 0 or 1)");
    const BooleanMonitor bm(f);
    std::cout << "\tstate\treward\toracle\tdiverges\n";
    std::uint32_t q = bm.start();
    for (std::size_t i = 1; i <= trace.size(); ++i) {
      q = bm.step(q, labels_for(bm.atoms(), trace.row_map(i)));
      const double want = evaluate(f, trace.prefix(i), 1);
      const bool bad = bm.output(q) != want;
      divergences += bad;
      std::cout << i << "\ts" << q << '\t' << bm.output(q) << '\t' << fmt(want) << '\t' << (bad ? "YES" : "no")
                << '\n';
    }
  }
  std::cout << "divergences: " << divergences << '\n';
  return divergences ? kFailed : kOk;
}

int cmd_run(const std::string& config_file, const std::string& out, std::optional<std::size_t> workers,
            std::optional<std::uint64_t> seed, std::optional<double> zeta) {
  ExperimentConfig cfg;
  try {
    cfg = ExperimentConfig::load(config_file);
    if (!out.empty()) cfg.out = out;
    if (workers) cfg.workers = *workers;
    if (seed) cfg.seed = *seed;
    if (zeta) cfg.zeta = *zeta;
    cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(std::string("invalid config:\n  ") + [&] {
      std::string s;
      for (const auto& p : e.problems()) s += (s.empty() ? "" : "\n  ") + p;
      return s;
    }());
  }
  std::cerr << "running " << cfg.runs << " run(s) x " << cfg.variants.size() << " variant(s) of "
            << cfg.environment << " on " << cfg.workers << " worker(s)\n";
  const auto res = run_experiment(cfg, [&](Variant v, std::size_t run, const RunResult& r) {
    std::cerr << "  " << variant_name(v) << " run " << run << ": completion " << fmt(r.final_completion(cfg.final_window))
              << ", converged " << (r.converged_episode ? std::to_string(*r.converged_episode) : "None") << '\n';
  });
  write_outputs(res, cfg.out);
  write_summary_csv(std::cout, cfg.environment, res.summary);
  std::cerr << "results in " << cfg.out << '\n';
  return kOk;
}

int cmd_check(const std::string& suite, const CheckOptions& opts) {
  Suite s;
  try {
    s = parse_suite(suite);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  const auto rep = run_check(s, opts);
  std::cout << rep.summary() << '\n';
  return rep.passed() ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantitative reward monitors for LTLf[F] specifications"};
  app.require_subcommand(1);

  std::string mode_text = "quantitative";
  std::string out;
  auto add_mode = [&](CLI::App* sub) {
    sub->add_option("--mode", mode_text, "Monitor kind")->check(CLI::IsMember({"boolean", "quantitative"}));
  };

  std::string formula, trace_file, config_file, suite;
  auto* compile = app.add_subcommand("compile", "Compile a formula and report its monitor");
  compile->add_option("formula", formula, "LTLf[F] formula")->required();
  add_mode(compile);
  compile->add_option("--out", out, "Directory for the monitor artifact and DOT graph");

  auto* eval = app.add_subcommand("eval", "Run a monitor over a trace and compare with the oracle");
  eval->add_option("formula", formula, "LTLf[F] formula")->required();
  eval->add_option("trace", trace_file, "Trace file (JSON lines)")->required();
  add_mode(eval);

  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  std::optional<double> zeta;
  auto* run = app.add_subcommand("run", "Run a training experiment from a JSON config");
  run->add_option("config", config_file, "Experiment config")->required();
  run->add_option("--out", out, "Output directory (overrides the config)");
  run->add_option("--workers", workers, "Worker threads");
  run->add_option("--seed", seed, "Base seed");
  run->add_option("--zeta", zeta, "Safety veto reward (<= 0)");

  CheckOptions copts;
  std::string kernel = std::string(kernel_name(copts.kernel));
  auto* check = app.add_subcommand("check", "Run a property suite");
  check->add_option("suite", suite, "oracle, linearity, crisp or veto")->required();
  check->add_option("--seed", copts.seed, "Seed");
  check->add_option("--formulas", copts.formulas, "Number of formulas (0 = suite default)");
  check->add_option("--kernel", kernel, "Lane kernel")->check(CLI::IsMember({"scalar", "avx2"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    const Mode mode = parse_mode(mode_text);
    if (*compile) return cmd_compile(formula, mode, out);
    if (*eval) return cmd_eval(formula, trace_file, mode);
    if (*run) return cmd_run(config_file, out, workers, seed, zeta);
    if (*check) {
      copts.kernel = kernel == "avx2" ? LaneKernel::Avx2 : LaneKernel::Scalar;
      if (!kernel_available(copts.kernel)) throw UsageError("kernel " + kernel + " is not available on this CPU");
      return cmd_check(suite, copts);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
