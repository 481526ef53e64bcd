#include "qmon/semantics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <unordered_map>

#include <json.hpp>

namespace qmon {

Trace::Trace(std::vector<std::string> atoms) : atoms_(std::move(atoms)) {
  std::vector<std::string> sorted = atoms_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw TraceError("duplicate atom in trace universe");
}

std::optional<std::size_t> Trace::atom_index(const std::string& name) const {
  auto it = std::find(atoms_.begin(), atoms_.end(), name);
  if (it == atoms_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - atoms_.begin());
}

void Trace::push(std::vector<double> row) {
  if (row.size() != atoms_.size())
    throw TraceError("row has " + std::to_string(row.size()) + " values, universe has " +
                     std::to_string(atoms_.size()));
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (!(row[k] >= 0.0 && row[k] <= 1.0))
      throw TraceError("label " + atoms_[k] + " out of [0,1] at step " +
                       std::to_string(rows_.size() + 1));
  }
  rows_.push_back(std::move(row));
}

void Trace::push(const std::map<std::string, double>& row) {
  std::vector<double> values(atoms_.size());
  for (std::size_t k = 0; k < atoms_.size(); ++k) {
    auto it = row.find(atoms_[k]);
    if (it == row.end())
      throw TraceError("step " + std::to_string(rows_.size() + 1) + " has no value for " +
                       atoms_[k]);
    values[k] = it->second;
  }
  if (row.size() != atoms_.size()) {
    for (const auto& [name, _] : row)
      if (!atom_index(name)) throw TraceError("atom " + name + " is not in the trace universe");
  }
  push(std::move(values));
}

double Trace::value(std::size_t i, std::size_t atom) const {
  if (i < 1 || i > rows_.size()) throw TraceError("trace index out of range");
  return rows_[i - 1].at(atom);
}

std::span<const double> Trace::row(std::size_t i) const {
  if (i < 1 || i > rows_.size()) throw TraceError("trace index out of range");
  return rows_[i - 1];
}

std::map<std::string, double> Trace::row_map(std::size_t i) const {
  auto r = row(i);
  std::map<std::string, double> out;
  for (std::size_t k = 0; k < atoms_.size(); ++k) out[atoms_[k]] = r[k];
  return out;
}

Trace Trace::prefix(std::size_t n) const {
  Trace t(atoms_);
  for (std::size_t i = 0; i < std::min(n, rows_.size()); ++i) t.rows_.push_back(rows_[i]);
  return t;
}

bool Trace::is_crisp() const {
  for (const auto& r : rows_)
    for (double v : r)
      if (v != 0.0 && v != 1.0) return false;
  return true;
}

namespace {

class Evaluator {
 public:
  explicit Evaluator(const Trace& trace) : trace_(trace), n_(trace.size()) {}

  double at(const Formula& f, std::size_t i) {
    auto& slot = memo_[f.id()];
    if (slot.empty()) slot.assign(n_ + 2, std::numeric_limits<double>::quiet_NaN());
    if (!std::isnan(slot[i])) return slot[i];
    const double v = compute(f, i);
    memo_[f.id()][i] = v;  // compute() may rehash memo_
    return v;
  }

 private:
  double compute(const Formula& f, std::size_t i) {
    switch (f.op()) {
      case Op::True: return 1.0;
      case Op::False: return 0.0;
      case Op::Atom: return trace_.value(i, atom(f));
      case Op::Not: return 1.0 - at(f.child(0), i);
      case Op::And: return std::min(at(f.lhs(), i), at(f.rhs(), i));
      case Op::Or: return std::max(at(f.lhs(), i), at(f.rhs(), i));
      case Op::Next: return i < n_ ? at(f.child(0), i + 1) : 0.0;
      case Op::Until: {
        double best = 0.0, prefix_min = 1.0;
        for (std::size_t j = i; j <= n_; ++j) {
          best = std::max(best, std::min(prefix_min, at(f.rhs(), j)));
          prefix_min = std::min(prefix_min, at(f.lhs(), j));
        }
        return best;
      }
      case Op::Release: {
        double worst = 1.0, prefix_max = 0.0;
        for (std::size_t j = i; j <= n_; ++j) {
          worst = std::min(worst, std::max(prefix_max, at(f.rhs(), j)));
          prefix_max = std::max(prefix_max, at(f.lhs(), j));
        }
        return worst;
      }
      case Op::Eventually: {
        double best = 0.0;
        for (std::size_t j = i; j <= n_; ++j) best = std::max(best, at(f.child(0), j));
        return best;
      }
      case Op::Always: {
        double worst = 1.0;
        for (std::size_t j = i; j <= n_; ++j) worst = std::min(worst, at(f.child(0), j));
        return worst;
      }
    }
    return 0.0;
  }

  std::size_t atom(const Formula& f) {
    auto it = atom_cache_.find(f.id());
    if (it != atom_cache_.end()) return it->second;
    auto idx = trace_.atom_index(f.name());
    if (!idx) throw TraceError("atom " + f.name() + " is not in the trace universe");
    atom_cache_.emplace(f.id(), *idx);
    return *idx;
  }

  const Trace& trace_;
  std::size_t n_;
  std::unordered_map<const void*, std::vector<double>> memo_;
  std::unordered_map<const void*, std::size_t> atom_cache_;
};

}  // namespace

double evaluate(const Formula& f, const Trace& trace, std::size_t i) {
  if (i < 1 || i > trace.size()) throw TraceError("evaluation index out of range");
  for (const auto& a : atoms(f))
    if (!trace.atom_index(a)) throw TraceError("atom " + a + " is not in the trace universe");
  return Evaluator(trace).at(f, i);
}

Trace read_trace(std::istream& in) {
  using nlohmann::json;
  std::string line;
  std::size_t lineno = 0;
  std::optional<Trace> trace;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw TraceError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object()) throw TraceError("line " + std::to_string(lineno) + ": expected an object");
    if (!trace) {
      if (!j.contains("atoms") || !j["atoms"].is_array())
        throw TraceError("first line must be a header {\"atoms\": [...]}");
      trace.emplace(j["atoms"].get<std::vector<std::string>>());
      continue;
    }
    std::map<std::string, double> row;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!it.value().is_number())
        throw TraceError("line " + std::to_string(lineno) + ": value of " + it.key() +
                         " is not a number");
      row[it.key()] = it.value().get<double>();
    }
    try {
      trace->push(row);
    } catch (const TraceError& e) {
      throw TraceError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!trace) throw TraceError("missing trace header");
  return *trace;
}

Trace read_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open " + path);
  return read_trace(in);
}

void write_trace(std::ostream& out, const Trace& trace) {
  nlohmann::json header;
  header["atoms"] = trace.atoms();
  out << header.dump() << '\n';
  for (std::size_t i = 1; i <= trace.size(); ++i) {
    nlohmann::json row = nlohmann::json::object();
    for (std::size_t k = 0; k < trace.atoms().size(); ++k) row[trace.atoms()[k]] = trace.value(i, k);
    out << row.dump() << '\n';
  }
}

}  // namespace qmon
