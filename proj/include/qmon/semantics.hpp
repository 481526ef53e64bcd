#pragma once

// Reference semantics of LTLf[F] on complete finite traces.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qmon/formula.hpp"

namespace qmon {

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A finite sequence of label valuations over a fixed atom universe.
// Positions are 1-based to match the usual presentation of the semantics.
class Trace {
 public:
  Trace() = default;
  explicit Trace(std::vector<std::string> atoms);

  const std::vector<std::string>& atoms() const { return atoms_; }
  std::optional<std::size_t> atom_index(const std::string& name) const;

  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

  // Rows must cover the universe exactly and lie in [0,1].
  void push(std::vector<double> row);
  void push(const std::map<std::string, double>& row);

  double value(std::size_t i, std::size_t atom) const;
  std::span<const double> row(std::size_t i) const;
  std::map<std::string, double> row_map(std::size_t i) const;

  Trace prefix(std::size_t n) const;
  bool is_crisp() const;

 private:
  std::vector<std::string> atoms_;
  std::vector<std::vector<double>> rows_;
};

// [[f, i]](trace). Memoized per call on (node, index); O(|f| * |trace|^2).
double evaluate(const Formula& f, const Trace& trace, std::size_t i);

// JSON lines: a header `{"atoms":[...]}` followed by one flat object per step.
Trace read_trace(std::istream& in);
Trace read_trace_file(const std::string& path);
void write_trace(std::ostream& out, const Trace& trace);

}  // namespace qmon
