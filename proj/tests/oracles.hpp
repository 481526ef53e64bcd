#pragma once

// Independent reference evaluators used only by the tests. They share no
// code with the library's semantics or monitors: the quantitative one is a
// direct, non-memoized transcription of the min/max semantics and the
// Boolean one is classical LTLf over crisp traces with bool arithmetic.

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "qmon/formula.hpp"

namespace oracle {

using Letter = std::map<std::string, double>;
using Word = std::vector<Letter>;

// [[f, i]] on the word, i 1-based.
inline double naive(const qmon::Formula& f, const Word& w, std::size_t i) {
  using qmon::Op;
  const std::size_t n = w.size();
  switch (f.op()) {
    case Op::True: return 1.0;
    case Op::False: return 0.0;
    case Op::Atom: return w[i - 1].at(f.name());
    case Op::Not: return 1.0 - naive(f.child(0), w, i);
    case Op::And: return std::min(naive(f.lhs(), w, i), naive(f.rhs(), w, i));
    case Op::Or: return std::max(naive(f.lhs(), w, i), naive(f.rhs(), w, i));
    case Op::Next: return i < n ? naive(f.child(0), w, i + 1) : 0.0;
    case Op::Eventually: {
      double best = 0.0;
      for (std::size_t j = i; j <= n; ++j) best = std::max(best, naive(f.child(0), w, j));
      return best;
    }
    case Op::Always: {
      double worst = 1.0;
      for (std::size_t j = i; j <= n; ++j) worst = std::min(worst, naive(f.child(0), w, j));
      return worst;
    }
    case Op::Until: {
      double best = 0.0;
      for (std::size_t j = i; j <= n; ++j) {
        double v = naive(f.rhs(), w, j);
        for (std::size_t k = i; k < j; ++k) v = std::min(v, naive(f.lhs(), w, k));
        best = std::max(best, v);
      }
      return best;
    }
    case Op::Release: {
      double worst = 1.0;
      for (std::size_t j = i; j <= n; ++j) {
        double v = naive(f.rhs(), w, j);
        for (std::size_t k = i; k < j; ++k) v = std::max(v, naive(f.lhs(), w, k));
        worst = std::min(worst, v);
      }
      return worst;
    }
  }
  return 0.0;
}

// Classical satisfaction of f at position i of a crisp word.
inline bool classical(const qmon::Formula& f, const Word& w, std::size_t i) {
  using qmon::Op;
  const std::size_t n = w.size();
  switch (f.op()) {
    case Op::True: return true;
    case Op::False: return false;
    case Op::Atom: return w[i - 1].at(f.name()) > 0.5;
    case Op::Not: return !classical(f.child(0), w, i);
    case Op::And: return classical(f.lhs(), w, i) && classical(f.rhs(), w, i);
    case Op::Or: return classical(f.lhs(), w, i) || classical(f.rhs(), w, i);
    case Op::Next: return i < n && classical(f.child(0), w, i + 1);
    case Op::Eventually:
      for (std::size_t j = i; j <= n; ++j)
        if (classical(f.child(0), w, j)) return true;
      return false;
    case Op::Always:
      for (std::size_t j = i; j <= n; ++j)
        if (!classical(f.child(0), w, j)) return false;
      return true;
    case Op::Until:
      for (std::size_t j = i; j <= n; ++j) {
        if (classical(f.rhs(), w, j)) return true;
        if (!classical(f.lhs(), w, j)) return false;
      }
      return false;
    case Op::Release:
      for (std::size_t j = i; j <= n; ++j) {
        if (!classical(f.rhs(), w, j)) return false;
        if (classical(f.lhs(), w, j)) return true;
      }
      return true;
  }
  return false;
}

}  // namespace oracle
