#pragma once

// Seeded property suites over random formulas and traces, with greedy
// counterexample shrinking.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qmon/batch.hpp"
#include "qmon/formula.hpp"
#include "qmon/semantics.hpp"

namespace qmon {

enum class Suite : std::uint8_t { Oracle, Linearity, Crisp, Veto };

std::string_view suite_name(Suite s);
// Throws std::invalid_argument.
Suite parse_suite(std::string_view s);

struct CheckOptions {
  std::uint64_t seed = 1;
  // 0 picks the suite default (oracle 1000, linearity 10000, crisp 500, veto 500).
  std::size_t formulas = 0;
  std::size_t traces = 20;  // per formula (per bundle for veto)
  std::size_t max_trace_length = 12;
  double tolerance = 1e-9;
  double linearity_bound = 2.0;
  std::vector<double> zetas{0.0, -5.0};
  LaneKernel kernel = best_kernel();
};

struct Counterexample {
  Formula formula = Formula::top();
  Trace trace;
  std::size_t index = 0;  // 1-based step of the first divergence; 0 if none applies
  std::string detail;
};

struct CheckReport {
  Suite suite = Suite::Oracle;
  std::uint64_t seed = 0;
  std::size_t cases = 0;  // formulas (or bundles) examined
  std::size_t checks = 0;  // individual comparisons
  std::size_t failures = 0;
  double seconds = 0.0;
  double worst = 0.0;  // largest error, or largest states/size ratio for linearity
  std::optional<Counterexample> counterexample;  // minimized first failure

  bool passed() const { return failures == 0; }
  std::string summary() const;
};

CheckReport run_check(Suite suite, const CheckOptions& opts = {});

// Returns the 1-based index at which (f, trace) misbehaves, if any.
using Divergence = std::function<std::optional<std::size_t>(const Formula&, const Trace&)>;

// Greedy shrink: first the trace (cut after the divergence, then drop single
// letters), then the formula (replace a node by a child, true or false),
// repeated until nothing smaller still diverges.
Counterexample shrink(Formula f, Trace trace, const Divergence& diverges);

// Divergence predicates used by the suites, exposed for tests.
std::optional<std::size_t> oracle_divergence(const Formula& f, const Trace& trace, double tolerance = 1e-9);
std::optional<std::size_t> crisp_divergence(const Formula& f, const Trace& trace);

}  // namespace qmon
