#include "qmon/obligation.hpp"

#include <algorithm>
#include <iterator>
#include <stdexcept>
#include <unordered_map>

namespace qmon {

namespace {

bool implies_mask(LitMask strong, LitMask weak) { return (strong & weak) == weak; }

Guard minimize(Guard g) {
  std::sort(g.begin(), g.end(), [](LitMask x, LitMask y) {
    const int px = __builtin_popcountll(x), py = __builtin_popcountll(y);
    return px != py ? px < py : x < y;
  });
  g.erase(std::unique(g.begin(), g.end()), g.end());
  Guard out;
  for (LitMask m : g) {
    bool redundant = false;
    for (LitMask k : out)
      if (implies_mask(m, k)) {
        redundant = true;
        break;
      }
    if (!redundant) out.push_back(m);
  }
  return out;
}

ObligationSet merge_sets(const ObligationSet& x, const ObligationSet& y) {
  ObligationSet out;
  out.reserve(x.size() + y.size());
  std::set_union(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(out));
  return out;
}

struct SetHash {
  std::size_t operator()(const ObligationSet& s) const {
    std::size_t h = s.size();
    for (int v : s) h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }
};

// Drops guard masks made redundant by a branch with a smaller target.
Expansion absorb(std::unordered_map<ObligationSet, Guard, SetHash>&& table) {
  Expansion out;
  out.reserve(table.size());
  for (auto& [obls, guard] : table) out.push_back(Branch{obls, minimize(std::move(guard))});
  std::sort(out.begin(), out.end(), [](const Branch& x, const Branch& y) {
    return x.obls.size() != y.obls.size() ? x.obls.size() < y.obls.size() : x.obls < y.obls;
  });
  // 64-bit signatures reject most non-subsets without touching the vectors.
  std::vector<std::uint64_t> sig(out.size(), 0);
  for (std::size_t j = 0; j < out.size(); ++j)
    for (int o : out[j].obls) sig[j] |= std::uint64_t{1} << (o & 63);
  for (std::size_t j = 0; j < out.size(); ++j) {
    for (std::size_t i = 0; i < j && !out[j].guard.empty(); ++i) {
      if (out[i].obls.size() >= out[j].obls.size()) break;
      if ((sig[i] & ~sig[j]) != 0) continue;
      if (!std::includes(out[j].obls.begin(), out[j].obls.end(), out[i].obls.begin(), out[i].obls.end()))
        continue;
      std::erase_if(out[j].guard, [&](LitMask m) {
        for (LitMask k : out[i].guard)
          if (implies_mask(m, k)) return true;
        return false;
      });
    }
  }
  std::erase_if(out, [](const Branch& b) { return b.guard.empty(); });
  return out;
}

}  // namespace

Guard guard_or(const Guard& x, const Guard& y) {
  Guard g = x;
  g.insert(g.end(), y.begin(), y.end());
  return minimize(std::move(g));
}

Guard guard_and(const Guard& x, const Guard& y) {
  Guard g;
  g.reserve(x.size() * y.size());
  for (LitMask a : x)
    for (LitMask b : y) g.push_back(a | b);
  return minimize(std::move(g));
}

Expansion disjoin(const Expansion& x, const Expansion& y) {
  std::unordered_map<ObligationSet, Guard, SetHash> table;
  for (const auto* e : {&x, &y})
    for (const auto& b : *e) {
      auto& g = table[b.obls];
      g.insert(g.end(), b.guard.begin(), b.guard.end());
    }
  return absorb(std::move(table));
}

Expansion conjoin(const Expansion& x, const Expansion& y) {
  std::unordered_map<ObligationSet, Guard, SetHash> table;
  for (const auto& a : x)
    for (const auto& b : y) {
      Guard g = guard_and(a.guard, b.guard);
      if (g.empty()) continue;
      auto& slot = table[merge_sets(a.obls, b.obls)];
      slot.insert(slot.end(), g.begin(), g.end());
    }
  return absorb(std::move(table));
}

ObligationStore::ObligationStore(std::vector<std::string> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.size() > kMaxObligationAtoms)
    throw std::invalid_argument("at most " + std::to_string(kMaxObligationAtoms) + " atoms supported");
  for (std::size_t i = 0; i < atoms_.size(); ++i) atom_ids_[atoms_[i]] = static_cast<int>(i);
}

int ObligationStore::make(NNode n) {
  // Identities that hold exactly in the min/max semantics.
  auto kind = [&](int id) { return nodes_[id].kind; };
  switch (n.kind) {
    case NKind::And:
      if (n.a == n.b || kind(n.b) == NKind::True) return n.a;
      if (kind(n.a) == NKind::True) return n.b;
      if (kind(n.a) == NKind::False) return n.a;
      if (kind(n.b) == NKind::False) return n.b;
      if (n.a > n.b) std::swap(n.a, n.b);
      break;
    case NKind::Or:
      if (n.a == n.b || kind(n.b) == NKind::False) return n.a;
      if (kind(n.a) == NKind::False) return n.b;
      if (kind(n.a) == NKind::True) return n.a;
      if (kind(n.b) == NKind::True) return n.b;
      if (n.a > n.b) std::swap(n.a, n.b);
      break;
    case NKind::Next:
      if (kind(n.a) == NKind::False) return n.a;
      break;
    case NKind::WeakNext:
      if (kind(n.a) == NKind::True) return n.a;
      break;
    case NKind::Until:
      if (n.a == n.b || kind(n.b) == NKind::True || kind(n.b) == NKind::False) return n.b;
      if (kind(n.a) == NKind::False) return n.b;
      if (kind(n.a) == NKind::True) return make(NNode{NKind::Eventually, -1, false, n.b});
      break;
    case NKind::Release:
      if (n.a == n.b || kind(n.b) == NKind::True || kind(n.b) == NKind::False) return n.b;
      if (kind(n.a) == NKind::True) return n.b;
      if (kind(n.a) == NKind::False) return make(NNode{NKind::Always, -1, false, n.b});
      break;
    case NKind::Eventually:
      if (kind(n.a) == NKind::True || kind(n.a) == NKind::False || kind(n.a) == NKind::Eventually)
        return n.a;
      break;
    case NKind::Always:
      if (kind(n.a) == NKind::True || kind(n.a) == NKind::False || kind(n.a) == NKind::Always)
        return n.a;
      // the last position makes a strong next false
      if (kind(n.a) == NKind::Next) return make(NNode{NKind::False});
      break;
    default: break;
  }
  return intern_node(n);
}

int ObligationStore::next_of(int id, bool weak) {
  // Always a genuine next node, so it can serve as an obligation.
  return intern_node(NNode{weak ? NKind::WeakNext : NKind::Next, -1, false, id, -1});
}

int ObligationStore::intern_node(const NNode& n) {
  auto it = index_.find(n);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(n);
  index_.emplace(n, id);
  return id;
}

int ObligationStore::intern(const Formula& f) { return convert(f, false); }

int ObligationStore::convert(const Formula& f, bool neg) {
  switch (f.op()) {
    case Op::True: return make(NNode{neg ? NKind::False : NKind::True});
    case Op::False: return make(NNode{neg ? NKind::True : NKind::False});
    case Op::Atom: {
      auto it = atom_ids_.find(f.name());
      if (it == atom_ids_.end()) throw std::invalid_argument("atom " + f.name() + " not declared");
      return make(NNode{NKind::Lit, it->second, neg});
    }
    case Op::Not: return convert(f.child(0), !neg);
    case Op::And:
    case Op::Or: {
      const bool conj = (f.op() == Op::And) != neg;
      const int a = convert(f.lhs(), neg), b = convert(f.rhs(), neg);
      return make(NNode{conj ? NKind::And : NKind::Or, -1, false, a, b});
    }
    case Op::Next:
      return make(NNode{neg ? NKind::WeakNext : NKind::Next, -1, false, convert(f.child(0), neg), -1});
    case Op::Until:
    case Op::Release: {
      const bool until = (f.op() == Op::Until) != neg;
      const int a = convert(f.lhs(), neg), b = convert(f.rhs(), neg);
      return make(NNode{until ? NKind::Until : NKind::Release, -1, false, a, b});
    }
    case Op::Eventually:
    case Op::Always: {
      const bool ev = (f.op() == Op::Eventually) != neg;
      return make(NNode{ev ? NKind::Eventually : NKind::Always, -1, false, convert(f.child(0), neg)});
    }
  }
  throw std::logic_error("unreachable");
}

const Expansion& ObligationStore::expand(int id) {
  auto it = expansions_.find(id);
  if (it != expansions_.end()) return it->second;
  auto e = compute_expand(id);
  return expansions_.emplace(id, std::move(e)).first->second;
}

Expansion ObligationStore::compute_expand(int id) {
  const NNode n = nodes_.at(id);
  auto obligation = [&](bool weak) { return Expansion{Branch{{next_of(id, weak)}, {0}}}; };
  switch (n.kind) {
    case NKind::True: return {Branch{{}, {0}}};
    case NKind::False: return {};
    case NKind::Lit: return {Branch{{}, {LitMask{1} << (2 * n.atom + (n.negated ? 1 : 0))}}};
    case NKind::And: {
      Expansion x = expand(n.a);
      return conjoin(x, expand(n.b));
    }
    case NKind::Or: {
      Expansion x = expand(n.a);
      return disjoin(x, expand(n.b));
    }
    case NKind::Next:
    case NKind::WeakNext: return {Branch{{id}, {0}}};
    case NKind::Until: {
      Expansion rhs = expand(n.b);
      Expansion lhs = expand(n.a);
      return disjoin(rhs, conjoin(lhs, obligation(false)));
    }
    case NKind::Release: {
      Expansion rhs = expand(n.b);
      Expansion lhs = expand(n.a);
      return conjoin(rhs, disjoin(lhs, obligation(true)));
    }
    case NKind::Eventually: {
      Expansion x = expand(n.a);
      return disjoin(x, obligation(false));
    }
    case NKind::Always: {
      Expansion x = expand(n.a);
      return conjoin(x, obligation(true));
    }
  }
  throw std::logic_error("unreachable");
}

Expansion ObligationStore::expand_set(const ObligationSet& s, std::size_t max_branches) {
  // Bodies with fewer branches first keeps intermediate products small.
  std::vector<const Expansion*> parts;
  for (int o : s) parts.push_back(&expand(nodes_.at(o).a));
  std::sort(parts.begin(), parts.end(), [](auto* x, auto* y) { return x->size() < y->size(); });
  Expansion acc{Branch{{}, {0}}};
  for (const auto* p : parts) {
    work_ += acc.size() * p->size();
    acc = conjoin(acc, *p);
    if (acc.empty()) return acc;
    if (acc.size() > max_branches) throw std::length_error("obligation expansion too large");
  }
  std::unordered_map<ObligationSet, Guard, SetHash> table;
  for (auto& b : acc) {
    auto& g = table[normalize(std::move(b.obls))];
    g.insert(g.end(), b.guard.begin(), b.guard.end());
  }
  return absorb(std::move(table));
}

LitMask ObligationStore::letter_literals(std::uint64_t letter, std::size_t atoms) {
  LitMask m = 0;
  for (std::size_t k = 0; k < atoms; ++k) m |= LitMask{1} << (2 * k + (((letter >> k) & 1U) ? 0 : 1));
  return m;
}

bool ObligationStore::all_weak(const ObligationSet& s) const {
  return std::all_of(s.begin(), s.end(), [&](int o) { return nodes_[o].kind == NKind::WeakNext; });
}

ObligationSet ObligationStore::normalize(ObligationSet s) const {
  std::vector<int> strong_children;
  for (int o : s)
    if (nodes_[o].kind == NKind::Next) strong_children.push_back(nodes_[o].a);
  if (strong_children.empty()) return s;
  std::sort(strong_children.begin(), strong_children.end());
  std::erase_if(s, [&](int o) {
    return nodes_[o].kind == NKind::WeakNext &&
           std::binary_search(strong_children.begin(), strong_children.end(), nodes_[o].a);
  });
  return s;
}

std::string ObligationStore::to_string(int id) const {
  const NNode& n = nodes_.at(id);
  switch (n.kind) {
    case NKind::True: return "true";
    case NKind::False: return "false";
    case NKind::Lit: return (n.negated ? "!" : "") + atoms_[n.atom];
    case NKind::And: return "(" + to_string(n.a) + " & " + to_string(n.b) + ")";
    case NKind::Or: return "(" + to_string(n.a) + " | " + to_string(n.b) + ")";
    case NKind::Next: return "X " + to_string(n.a);
    case NKind::WeakNext: return "WX " + to_string(n.a);
    case NKind::Until: return "(" + to_string(n.a) + " U " + to_string(n.b) + ")";
    case NKind::Release: return "(" + to_string(n.a) + " R " + to_string(n.b) + ")";
    case NKind::Eventually: return "F " + to_string(n.a);
    case NKind::Always: return "G " + to_string(n.a);
  }
  return "?";
}

std::string ObligationStore::to_string(const ObligationSet& s) const {
  std::string out = "{";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += to_string(s[i]);
  }
  return out + "}";
}

}  // namespace qmon
