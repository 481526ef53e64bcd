#include "qmon/monitor.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>

namespace qmon {

std::size_t Qrm::num_instructions() const {
  std::size_t n = 0;
  for (const auto& s : program) n += s.size();
  return n;
}

std::uint32_t Qrm::register_index(const std::string& name) const {
  for (std::size_t i = 0; i < registers.size(); ++i)
    if (registers[i].name == name) return static_cast<std::uint32_t>(i);
  throw std::out_of_range("no register named " + name);
}

namespace detail {

// A relocatable piece of monitor: register and label indices are local.
struct Fragment {
  std::size_t stem = 0;
  std::size_t cycle = 1;
  std::vector<std::string> atoms;  // sorted
  std::vector<Register> regs;      // names are base names
  std::vector<std::vector<Instruction>> code;
  std::uint32_t out = 0;
  bool exact = true;

  std::size_t states() const { return stem + cycle; }
};

}  // namespace detail

using detail::Fragment;

struct CacheAccess {
  static auto& fragments(SynthCache& c) { return c.fragments_; }
  static void count(SynthCache& c, const Formula& f) {
    ++c.total_;
    ++c.counts_[f];
  }
};

SynthCache::SynthCache() = default;
SynthCache::~SynthCache() = default;

std::size_t SynthCache::constructions(const Formula& f) const {
  auto it = counts_.find(f);
  return it == counts_.end() ? 0 : it->second;
}

namespace {

// Past these the exact program is abandoned for the running-register
// approximation (see running_program).
constexpr std::size_t kMaxObligationSets = 4096;
constexpr std::size_t kMaxObligationEdges = 1 << 17;
constexpr std::size_t kMaxBranches = 4096;
constexpr std::size_t kMaxObligationWork = 1 << 18;

struct BudgetExceeded {};
constexpr std::size_t kMaxStack = 256;

using Expr = std::vector<ExprNode>;

Expr e_const(double v) { return {ExprNode{ExprOp::Const, v, 0}}; }
Expr e_label(std::uint32_t k) { return {ExprNode{ExprOp::Label, 0.0, k}}; }
Expr e_reg(std::uint32_t r) { return {ExprNode{ExprOp::Reg, 0.0, r}}; }
Expr e_not(Expr x) {
  x.push_back({ExprOp::Complement});
  return x;
}
Expr e_bin(ExprOp op, Expr x, const Expr& y) {
  x.insert(x.end(), y.begin(), y.end());
  x.push_back({op});
  return x;
}
Expr e_min(Expr x, const Expr& y) { return e_bin(ExprOp::Min, std::move(x), y); }
Expr e_max(Expr x, const Expr& y) { return e_bin(ExprOp::Max, std::move(x), y); }

std::size_t lasso_pos(std::size_t stem, std::size_t cycle, std::size_t i) {
  return i < stem ? i : stem + (i - stem) % cycle;
}

LassoShape product(LassoShape a, LassoShape b) {
  return {std::max(a.stem, b.stem), std::lcm(a.cycle, b.cycle)};
}

// Final state loops back to the penultimate one.
LassoShape loop_back(LassoShape s) {
  const std::size_t n = s.states();
  if (n >= 2 && s.cycle == 1) return {n - 2, 2};
  return s;
}

bool is_propositional(const Formula& f) { return !f.is_temporal(); }

bool is_persistence(const Formula& f) {
  return (f.op() == Op::Eventually && f.child(0).op() == Op::Always) ||
         (f.op() == Op::Always && f.child(0).op() == Op::Eventually);
}

std::uint32_t atom_slot(const std::vector<std::string>& atoms, const std::string& name) {
  auto it = std::lower_bound(atoms.begin(), atoms.end(), name);
  return static_cast<std::uint32_t>(it - atoms.begin());
}

// Value of a propositional formula on the current letter.
Expr now_expr(const Formula& f, const std::vector<std::string>& atoms) {
  switch (f.op()) {
    case Op::True: return e_const(1.0);
    case Op::False: return e_const(0.0);
    case Op::Atom: return e_label(atom_slot(atoms, f.name()));
    case Op::Not: return e_not(now_expr(f.child(0), atoms));
    case Op::And: return e_min(now_expr(f.lhs(), atoms), now_expr(f.rhs(), atoms));
    case Op::Or: return e_max(now_expr(f.lhs(), atoms), now_expr(f.rhs(), atoms));
    default: throw std::logic_error("now_expr on a temporal formula");
  }
}

// Value of f on the one-letter trace made of the current letter.
Expr last_expr(const Formula& f, const std::vector<std::string>& atoms) {
  switch (f.op()) {
    case Op::Next: return e_const(0.0);
    case Op::Until:
    case Op::Release: return last_expr(f.rhs(), atoms);
    case Op::Eventually:
    case Op::Always: return last_expr(f.child(0), atoms);
    case Op::Not: return e_not(last_expr(f.child(0), atoms));
    case Op::And: return e_min(last_expr(f.lhs(), atoms), last_expr(f.rhs(), atoms));
    case Op::Or: return e_max(last_expr(f.lhs(), atoms), last_expr(f.rhs(), atoms));
    default: return now_expr(f, atoms);
  }
}

std::vector<std::string> sorted_atoms(const Formula& f) {
  auto s = atoms(f);
  return {s.begin(), s.end()};
}

std::uint32_t add_reg(Fragment& fr, std::string base, double initial) {
  fr.regs.push_back({std::move(base), initial});
  return static_cast<std::uint32_t>(fr.regs.size() - 1);
}

void append_everywhere(Fragment& fr, const Instruction& ins) {
  for (auto& c : fr.code) c.push_back(ins);
}

Instruction relocate(const Instruction& ins, std::uint32_t reg_offset,
                     const std::vector<std::uint32_t>& atom_map) {
  Instruction out{ins.target + reg_offset, ins.expr};
  for (auto& n : out.expr) {
    if (n.op == ExprOp::Reg) n.index += reg_offset;
    else if (n.op == ExprOp::Label) n.index = atom_map[n.index];
  }
  return out;
}

std::vector<std::uint32_t> atom_map(const std::vector<std::string>& from,
                                    const std::vector<std::string>& to) {
  std::vector<std::uint32_t> m;
  for (const auto& a : from) m.push_back(atom_slot(to, a));
  return m;
}

struct Merged {
  Fragment frag;
  std::uint32_t a_out;
  std::uint32_t b_out;
};

// Synchronous product of two lassos; both programs run in every product state.
Merged merge(const Fragment& a, const Fragment& b) {
  Fragment m;
  const LassoShape s = product({a.stem, a.cycle}, {b.stem, b.cycle});
  m.stem = s.stem;
  m.cycle = s.cycle;
  std::set_union(a.atoms.begin(), a.atoms.end(), b.atoms.begin(), b.atoms.end(),
                 std::back_inserter(m.atoms));
  const auto amap = atom_map(a.atoms, m.atoms), bmap = atom_map(b.atoms, m.atoms);
  const auto offset = static_cast<std::uint32_t>(a.regs.size());
  m.regs = a.regs;
  m.regs.insert(m.regs.end(), b.regs.begin(), b.regs.end());
  m.code.resize(m.states());
  for (std::size_t i = 0; i < m.states(); ++i) {
    for (const auto& ins : a.code[lasso_pos(a.stem, a.cycle, i)]) m.code[i].push_back(relocate(ins, 0, amap));
    for (const auto& ins : b.code[lasso_pos(b.stem, b.cycle, i)])
      m.code[i].push_back(relocate(ins, offset, bmap));
  }
  m.exact = a.exact && b.exact;
  return {std::move(m), a.out, b.out + offset};
}

// A single-state fragment; its program runs unchanged at every step.
Fragment uniform(std::vector<std::string> atoms) {
  Fragment fr;
  fr.atoms = std::move(atoms);
  fr.code.resize(1);
  return fr;
}

// Spreads a single-state program over the given lasso.
Fragment replicate(Fragment fr, LassoShape shape) {
  fr.stem = shape.stem;
  fr.cycle = shape.cycle;
  fr.code.assign(shape.states(), fr.code.at(0));
  return fr;
}

// Exact register program for temporal operators over temporal operands: one
// register per reachable set of pending obligations, holding the best
// max-min value of any run that leaves exactly those obligations open.
Fragment obligation_program(const Formula& f) {
  Fragment fr = uniform(sorted_atoms(f));
  ObligationStore store(fr.atoms);
  const int root = store.intern(f);
  const ObligationSet start{store.next_of(root, false)};

  std::vector<ObligationSet> sets{start};
  std::map<ObligationSet, std::size_t> index{{start, 0}};
  struct Edge {
    std::size_t from;
    Guard guard;
    std::size_t to;
  };
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    Expansion next;
    try {
      next = store.expand_set(sets[i], kMaxBranches);
    } catch (const std::length_error&) {
      throw BudgetExceeded{};
    }
    if (edges.size() + next.size() > kMaxObligationEdges || store.work() > kMaxObligationWork)
      throw BudgetExceeded{};
    for (auto& t : next) {
      auto [it, fresh] = index.emplace(t.obls, sets.size());
      if (fresh) {
        if (sets.size() >= kMaxObligationSets) throw BudgetExceeded{};
        sets.push_back(t.obls);
      }
      edges.push_back({i, std::move(t.guard), it->second});
    }
  }

  // Keep only sets from which an all-weak set (trace may end) is reachable.
  const std::size_t n = sets.size();
  std::vector<std::vector<std::size_t>> preds(n);
  for (const auto& e : edges) preds[e.to].push_back(e.from);
  std::vector<bool> useful(n, false);
  std::deque<std::size_t> work;
  for (std::size_t i = 0; i < n; ++i)
    if (store.all_weak(sets[i])) {
      useful[i] = true;
      work.push_back(i);
    }
  while (!work.empty()) {
    const std::size_t j = work.front();
    work.pop_front();
    for (std::size_t p : preds[j])
      if (!useful[p]) {
        useful[p] = true;
        work.push_back(p);
      }
  }

  std::vector<std::uint32_t> reg(n, 0), tmp(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (useful[i]) reg[i] = add_reg(fr, "t_obl", i == 0 ? 1.0 : 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (useful[i]) tmp[i] = add_reg(fr, "t_tmp", 0.0);
  fr.out = add_reg(fr, "t_val", 0.0);

  std::vector<std::vector<Expr>> incoming(n);
  for (const auto& e : edges) {
    if (!useful[e.from] || !useful[e.to]) continue;
    Expr x = e_reg(reg[e.from]);
    Expr any;
    bool unconditional = false;
    for (LitMask m : e.guard) {
      if (m == 0) {
        unconditional = true;
        break;
      }
      Expr conj;
      for (LitMask rest = m; rest != 0; rest &= rest - 1) {
        const int bit = std::countr_zero(rest);
        Expr lab = e_label(static_cast<std::uint32_t>(bit / 2));
        if (bit % 2 != 0) lab = e_not(std::move(lab));
        conj = conj.empty() ? std::move(lab) : e_min(std::move(conj), std::move(lab));
      }
      any = any.empty() ? std::move(conj) : e_max(std::move(any), std::move(conj));
    }
    if (!unconditional) x = e_min(std::move(x), std::move(any));
    incoming[e.to].push_back(std::move(x));
  }
  std::vector<Instruction> prog;
  for (std::size_t i = 0; i < n; ++i) {
    if (!useful[i]) continue;
    Expr x = incoming[i].empty() ? e_const(0.0) : incoming[i][0];
    for (std::size_t k = 1; k < incoming[i].size(); ++k) x = e_max(std::move(x), incoming[i][k]);
    prog.push_back({tmp[i], std::move(x)});
  }
  for (std::size_t i = 0; i < n; ++i)
    if (useful[i]) prog.push_back({reg[i], e_reg(tmp[i])});
  Expr value;
  for (std::size_t i = 0; i < n; ++i) {
    if (!useful[i] || !store.all_weak(sets[i])) continue;
    value = value.empty() ? e_reg(reg[i]) : e_max(std::move(value), e_reg(reg[i]));
  }
  prog.push_back({fr.out, value.empty() ? e_const(0.0) : value});
  for (auto& c : fr.code) c = prog;
  return fr;
}

// Running-register rules. Exact when the operands are propositional;
// otherwise each operand is scored on the current letter alone, which is the
// approximation used when the exact program exceeds its budget.
Fragment running_program(const Formula& f) {
  Fragment fr = uniform(sorted_atoms(f));
  const auto& at = fr.atoms;
  switch (f.op()) {
    case Op::Eventually: {
      fr.out = add_reg(fr, "t_F", 0.0);
      append_everywhere(fr, {fr.out, e_max(e_reg(fr.out), last_expr(f.child(0), at))});
      break;
    }
    case Op::Always: {
      fr.out = add_reg(fr, "t_G", 1.0);
      append_everywhere(fr, {fr.out, e_min(e_reg(fr.out), last_expr(f.child(0), at))});
      break;
    }
    case Op::Until: {
      const auto lo = add_reg(fr, "t_min", 1.0), hi = add_reg(fr, "t_max", 0.0);
      fr.out = add_reg(fr, "t_U", 0.0);
      // lo lags one step: it holds the min of the left operand strictly before now.
      append_everywhere(fr, {hi, e_max(e_reg(hi), last_expr(f.rhs(), at))});
      append_everywhere(fr, {fr.out, e_max(e_reg(fr.out), e_min(e_reg(lo), e_reg(hi)))});
      append_everywhere(fr, {lo, e_min(e_reg(lo), last_expr(f.lhs(), at))});
      break;
    }
    case Op::Release: {
      const auto hi = add_reg(fr, "t_max", 0.0), lo = add_reg(fr, "t_min", 1.0);
      fr.out = add_reg(fr, "t_R", 1.0);
      append_everywhere(fr, {lo, e_min(e_reg(lo), last_expr(f.rhs(), at))});
      append_everywhere(fr, {fr.out, e_min(e_reg(fr.out), e_max(e_reg(hi), e_reg(lo)))});
      append_everywhere(fr, {hi, e_max(e_reg(hi), last_expr(f.lhs(), at))});
      break;
    }
    default: throw std::logic_error("running_program on a non-temporal operator");
  }
  return fr;
}

// Rewrites that expose Boolean structure under temporal operators, so that
// independent parts get separate (additively sized) register programs. All
// are identities of the min/max semantics on finite traces.
Formula distribute(const Formula& f) {
  switch (f.op()) {
    case Op::And:
      return Formula::conj(distribute(f.lhs()), distribute(f.rhs()));
    case Op::Or:
      return Formula::disj(distribute(f.lhs()), distribute(f.rhs()));
    case Op::Always: {
      const Formula& c = f.child(0);
      if (c.op() == Op::And)
        return Formula::conj(distribute(Formula::always(c.lhs())), distribute(Formula::always(c.rhs())));
      if (c.op() == Op::Next) return Formula::bottom();
      if (c.op() == Op::Always) return distribute(c);
      return f;
    }
    case Op::Eventually: {
      const Formula& c = f.child(0);
      if (c.op() == Op::Or)
        return Formula::disj(distribute(Formula::eventually(c.lhs())),
                             distribute(Formula::eventually(c.rhs())));
      if (c.op() == Op::Eventually) return distribute(c);
      return f;
    }
    case Op::Until: {
      const Formula& r = f.rhs();
      if (r.op() == Op::Or)
        return Formula::disj(distribute(Formula::until(f.lhs(), r.lhs())),
                             distribute(Formula::until(f.lhs(), r.rhs())));
      if (r.op() == Op::True || r.op() == Op::False) return r;
      return f;
    }
    case Op::Release: {
      const Formula& r = f.rhs();
      if (r.op() == Op::And)
        return Formula::conj(distribute(Formula::release(f.lhs(), r.lhs())),
                             distribute(Formula::release(f.lhs(), r.rhs())));
      if (r.op() == Op::True || r.op() == Op::False) return r;
      return f;
    }
    default: return f;
  }
}

Fragment combine(const Fragment& a, const Fragment& b, bool conj) {
  auto [fr, x, y] = merge(a, b);
  const double init = conj ? std::min(fr.regs[x].initial, fr.regs[y].initial)
                           : std::max(fr.regs[x].initial, fr.regs[y].initial);
  fr.out = add_reg(fr, conj ? "t_and" : "t_or", init);
  append_everywhere(fr, {fr.out, conj ? e_min(e_reg(x), e_reg(y)) : e_max(e_reg(x), e_reg(y))});
  return fr;
}

// Single-state program for f evaluated from the step it is started at.
Fragment uniform_program(const Formula& f) {
  switch (f.op()) {
    case Op::True:
    case Op::False: {
      Fragment fr = uniform({});
      fr.out = add_reg(fr, f.op() == Op::True ? "t_true" : "t_false", f.op() == Op::True ? 1.0 : 0.0);
      return fr;
    }
    case Op::And:
    case Op::Or:
      if (f.is_temporal())
        return combine(uniform_program(f.lhs()), uniform_program(f.rhs()), f.op() == Op::And);
      break;
    case Op::Until:
    case Op::Release:
    case Op::Eventually:
    case Op::Always: {
      if (is_persistence(f)) {
        Fragment fr = uniform(sorted_atoms(f));
        fr.out = add_reg(fr, "t_last", 0.0);
        append_everywhere(fr, {fr.out, last_expr(f.child(0).child(0), fr.atoms)});
        return fr;
      }
      bool prop = true;
      for (std::size_t i = 0; i < f.arity(); ++i) prop = prop && is_propositional(f.child(i));
      if (prop) return running_program(f);
      try {
        return obligation_program(f);
      } catch (const BudgetExceeded&) {
        Fragment fr = running_program(f);
        fr.exact = false;
        return fr;
      }
    }
    default: break;
  }
  return obligation_program(f);
}

std::shared_ptr<const Fragment> fragment(const Formula& f, SynthCache& cache);

Fragment build(const Formula& f, SynthCache& cache) {
  switch (f.op()) {
    case Op::True:
    case Op::False: {
      Fragment fr;
      fr.code.resize(1);
      fr.out = add_reg(fr, f.op() == Op::True ? "t_true" : "t_false", f.op() == Op::True ? 1.0 : 0.0);
      return fr;
    }
    case Op::Atom: {
      Fragment fr;
      fr.stem = 1;
      fr.atoms = {f.name()};
      fr.code.resize(2);
      fr.out = add_reg(fr, "t_" + f.name(), 0.0);
      fr.code[0].push_back({fr.out, e_label(0)});
      return fr;
    }
    case Op::Not: {
      Fragment fr = *fragment(f.child(0), cache);
      const auto in = fr.out;
      fr.out = add_reg(fr, "t_not", 1.0 - fr.regs[in].initial);
      append_everywhere(fr, {fr.out, e_not(e_reg(in))});
      return fr;
    }
    case Op::And:
    case Op::Or: {
      auto a = fragment(f.lhs(), cache);
      auto b = fragment(f.rhs(), cache);
      auto [fr, x, y] = merge(*a, *b);
      const bool conj = f.op() == Op::And;
      const double init = conj ? std::min(fr.regs[x].initial, fr.regs[y].initial)
                               : std::max(fr.regs[x].initial, fr.regs[y].initial);
      fr.out = add_reg(fr, conj ? "t_and" : "t_or", init);
      append_everywhere(fr, {fr.out, conj ? e_min(e_reg(x), e_reg(y)) : e_max(e_reg(x), e_reg(y))});
      return fr;
    }
    case Op::Next: {
      const Fragment& c = *fragment(f.child(0), cache);
      Fragment fr;
      fr.stem = c.stem + 1;
      fr.cycle = c.cycle;
      fr.atoms = c.atoms;
      fr.regs = c.regs;
      fr.exact = c.exact;
      fr.out = add_reg(fr, "t_next", 0.0);
      fr.code.resize(fr.states());
      for (std::size_t i = 0; i < c.states(); ++i) {
        fr.code[i + 1] = c.code[i];
        fr.code[i + 1].push_back({fr.out, e_reg(c.out)});
      }
      return fr;
    }
    case Op::Until:
    case Op::Release:
    case Op::Eventually:
    case Op::Always: {
      Formula g = distribute(to_nnf(f));
      if (is_persistence(f)) g = f;
      Fragment fr = uniform_program(g);
      // keep the atom universe of f even if a rewrite dropped some atoms
      if (fr.atoms != sorted_atoms(f)) {
        auto widened = merge(uniform(sorted_atoms(f)), fr);
        fr = std::move(widened.frag);
        fr.out = widened.b_out;
      }
      return replicate(std::move(fr), lasso_shape(f));
    }
  }
  throw std::logic_error("unreachable");
}

std::shared_ptr<const Fragment> fragment(const Formula& f, SynthCache& cache) {
  auto& table = CacheAccess::fragments(cache);
  auto it = table.find(f);
  if (it != table.end()) return it->second;
  CacheAccess::count(cache, f);
  auto fr = std::make_shared<const Fragment>(build(f, cache));
  table.emplace(f, fr);
  return fr;
}

std::size_t stack_need(const Expr& e) {
  std::size_t depth = 0, peak = 0;
  for (const auto& n : e) {
    switch (n.op) {
      case ExprOp::Const:
      case ExprOp::Label:
      case ExprOp::Reg: ++depth; break;
      case ExprOp::Complement: break;
      case ExprOp::Min:
      case ExprOp::Max: --depth; break;
    }
    peak = std::max(peak, depth);
  }
  return peak;
}

Qrm finalize(const Formula& f, const Fragment& fr) {
  Qrm m;
  m.formula = f;
  m.atoms = fr.atoms;
  for (std::size_t i = 0; i < fr.regs.size(); ++i)
    m.registers.push_back({fr.regs[i].name + "#" + std::to_string(i), fr.regs[i].initial});
  m.program = fr.code;
  m.successor.resize(fr.states());
  for (std::size_t i = 0; i < fr.states(); ++i)
    m.successor[i] = static_cast<std::uint32_t>(i + 1 < fr.states() ? i + 1 : fr.stem);
  m.reward_register = fr.out;
  m.exact = fr.exact;
  for (const auto& state : m.program)
    for (const auto& ins : state)
      if (stack_need(ins.expr) > kMaxStack) throw MonitorTooLarge("expression too deep");
  return m;
}

}  // namespace

LassoShape lasso_shape(const Formula& f) {
  switch (f.op()) {
    case Op::True:
    case Op::False: return {0, 1};
    case Op::Atom: return {1, 1};
    case Op::Not: return lasso_shape(f.child(0));
    case Op::And:
    case Op::Or: return product(lasso_shape(f.lhs()), lasso_shape(f.rhs()));
    case Op::Next: {
      auto s = lasso_shape(f.child(0));
      return {s.stem + 1, s.cycle};
    }
    case Op::Until:
    case Op::Release: return loop_back(product(lasso_shape(f.lhs()), lasso_shape(f.rhs())));
    case Op::Eventually:
    case Op::Always: return loop_back(lasso_shape(f.child(0)));
  }
  throw std::logic_error("unreachable");
}

Qrm synth(const Formula& f, SynthCache& cache) { return finalize(f, *fragment(f, cache)); }

Qrm synth(const Formula& f) {
  SynthCache cache;
  return synth(f, cache);
}

Qrm construct(const Formula& f) {
  SynthCache cache;
  return finalize(f, build(f, cache));
}

// ---------------------------------------------------------------------------
// Runtime

void execute(const Qrm& m, std::uint32_t state, std::span<const double> labels,
             std::span<double> values) {
  std::array<double, kMaxStack> stack;
  for (const auto& ins : m.program[state]) {
    std::size_t sp = 0;
    for (const auto& n : ins.expr) {
      switch (n.op) {
        case ExprOp::Const: stack[sp++] = n.value; break;
        case ExprOp::Label: stack[sp++] = labels[n.index]; break;
        case ExprOp::Reg: stack[sp++] = values[n.index]; break;
        case ExprOp::Complement: stack[sp - 1] = 1.0 - stack[sp - 1]; break;
        case ExprOp::Min:
          --sp;
          stack[sp - 1] = std::min(stack[sp - 1], stack[sp]);
          break;
        case ExprOp::Max:
          --sp;
          stack[sp - 1] = std::max(stack[sp - 1], stack[sp]);
          break;
      }
    }
    values[ins.target] = stack[0];
  }
}

std::vector<double> labels_for(const std::vector<std::string>& atoms,
                               const std::map<std::string, double>& labels) {
  std::vector<double> out;
  out.reserve(atoms.size());
  for (const auto& a : atoms) {
    auto it = labels.find(a);
    if (it == labels.end()) throw MissingLabel("no label for atom " + a);
    out.push_back(it->second);
  }
  return out;
}

namespace {

void check_width(const Qrm& m, std::span<const double> labels) {
  if (labels.size() != m.atoms.size())
    throw MissingLabel("expected " + std::to_string(m.atoms.size()) + " labels, got " +
                       std::to_string(labels.size()));
}

}  // namespace

MonitorState init(const Qrm& m, std::span<const double> labels) {
  check_width(m, labels);
  MonitorState ms;
  ms.q = m.initial_state;
  ms.values.reserve(m.registers.size());
  for (const auto& r : m.registers) ms.values.push_back(r.initial);
  execute(m, ms.q, labels, ms.values);
  ms.q = m.successor[ms.q];
  ms.steps = 1;
  return ms;
}

MonitorState init(const Qrm& m, const std::map<std::string, double>& labels) {
  return init(m, labels_for(m.atoms, labels));
}

void step(const Qrm& m, MonitorState& ms, std::span<const double> labels) {
  check_width(m, labels);
  execute(m, ms.q, labels, ms.values);
  ms.q = m.successor[ms.q];
  ++ms.steps;
}

void step(const Qrm& m, MonitorState& ms, const std::map<std::string, double>& labels) {
  step(m, ms, labels_for(m.atoms, labels));
}

MonitorState step(const MonitorState& ms, const Qrm& m, const std::map<std::string, double>& labels) {
  MonitorState next = ms;
  step(m, next, labels);
  return next;
}

double reward_value(const MonitorState& ms, const Qrm& m) { return ms.values.at(m.reward_register); }

double reward(const MonitorState& ms, const Qrm& m) { return reward_value(ms, m) * m.weight; }

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string expr_to_string(const Qrm& m, const std::vector<ExprNode>& expr) {
  std::vector<std::string> stack;
  for (const auto& n : expr) {
    switch (n.op) {
      case ExprOp::Const: stack.push_back(format_number(n.value)); break;
      case ExprOp::Label: stack.push_back("L(" + m.atoms.at(n.index) + ")"); break;
      case ExprOp::Reg: stack.push_back(m.registers.at(n.index).name); break;
      case ExprOp::Complement: stack.back() = "1 - " + stack.back(); break;
      case ExprOp::Min:
      case ExprOp::Max: {
        std::string rhs = std::move(stack.back());
        stack.pop_back();
        // flatten left-nested chains of the same operator
        std::string& lhs = stack.back();
        const std::string name = n.op == ExprOp::Min ? "min(" : "max(";
        if (lhs.starts_with(name) && lhs.back() == ')') {
          lhs.pop_back();
          lhs += ", " + rhs + ")";
        } else {
          lhs = name + lhs + ", " + rhs + ")";
        }
        break;
      }
    }
  }
  return stack.empty() ? "" : stack.back();
}

std::string serialize(const Qrm& m) {
  std::ostringstream os;
  os << "qrm 1\n";
  os << "formula " << to_string(m.formula) << "\n";
  os << "atoms";
  for (const auto& a : m.atoms) os << ' ' << a;
  os << "\nweight " << format_number(m.weight) << "\n";
  os << "states " << m.num_states() << "\n";
  os << "initial q" << m.initial_state << "\n";
  os << "reward " << m.registers.at(m.reward_register).name << "\n";
  os << "registers " << m.registers.size() << "\n";
  for (const auto& r : m.registers) os << "  " << r.name << " = " << format_number(r.initial) << "\n";
  for (std::size_t q = 0; q < m.num_states(); ++q) {
    os << "state q" << q << " -> q" << m.successor[q] << "\n";
    for (const auto& ins : m.program[q])
      os << "  " << m.registers.at(ins.target).name << " <- " << expr_to_string(m, ins.expr) << "\n";
  }
  return os.str();
}

std::string to_dot(const Qrm& m) {
  std::ostringstream os;
  os << "digraph qrm {\n  rankdir=LR;\n  node [shape=circle];\n";
  os << "  start [shape=point];\n  start -> q" << m.initial_state << ";\n";
  for (std::size_t q = 0; q < m.num_states(); ++q)
    os << "  q" << q << " [label=\"q" << q << "\\n" << m.program[q].size() << " instr\"];\n";
  for (std::size_t q = 0; q < m.num_states(); ++q) os << "  q" << q << " -> q" << m.successor[q] << ";\n";
  os << "}\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Boolean monitor

BooleanMonitor::BooleanMonitor(const Formula& f, double weight)
    : formula_(f), weight_(weight), atoms_(sorted_atoms(f)), store_(atoms_) {
  if (atoms_.size() > 64) throw std::invalid_argument("Boolean monitor supports at most 64 atoms");
  const int root = store_.intern(f);
  intern({ObligationSet{store_.next_of(root, false)}});
}

std::uint32_t BooleanMonitor::intern(Antichain a) const {
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  Antichain minimal;
  for (const auto& s : a) {
    bool dominated = false;
    for (const auto& t : a)
      if (t != s && std::includes(s.begin(), s.end(), t.begin(), t.end())) {
        dominated = true;
        break;
      }
    if (!dominated) minimal.push_back(s);
  }
  auto it = index_.find(minimal);
  if (it != index_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(states_.size());
  bool acc = false;
  for (const auto& s : minimal) acc = acc || store_.all_weak(s);
  states_.push_back(minimal);
  accepting_.push_back(acc ? 1 : 0);
  transitions_.emplace_back();
  index_.emplace(std::move(minimal), id);
  return id;
}

std::uint32_t BooleanMonitor::step(std::uint32_t q, std::uint64_t letter) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto& row = transitions_.at(q);
  if (auto it = row.find(letter); it != row.end()) return it->second;
  Antichain next;
  const Antichain current = states_[q];
  const LitMask lits = ObligationStore::letter_literals(letter, store_.atoms().size());
  for (const auto& s : current) {
    for (const auto& t : store_.expand_set(s)) {
      const bool holds = std::any_of(t.guard.begin(), t.guard.end(),
                                     [&](LitMask m) { return (m & ~lits) == 0; });
      if (holds) next.push_back(t.obls);
    }
  }
  const auto target = intern(std::move(next));
  transitions_[q].emplace(letter, target);
  return target;
}

std::uint64_t BooleanMonitor::letter_of(std::span<const double> labels) {
  std::uint64_t letter = 0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k] == 1.0) letter |= std::uint64_t{1} << k;
    else if (labels[k] != 0.0)
      throw NonCrispLabel("Boolean monitor received non-crisp label " + format_number(labels[k]));
  }
  return letter;
}

std::uint32_t BooleanMonitor::step(std::uint32_t q, std::span<const double> labels) const {
  if (labels.size() != atoms_.size())
    throw MissingLabel("expected " + std::to_string(atoms_.size()) + " labels, got " +
                       std::to_string(labels.size()));
  return step(q, letter_of(labels));
}

int BooleanMonitor::output(std::uint32_t q) const {
  std::lock_guard<std::mutex> lock(mutex_);
  return accepting_.at(q);
}

bool BooleanMonitor::is_bottom(std::uint32_t q) const {
  std::lock_guard<std::mutex> lock(mutex_);
  return states_.at(q).empty();
}

std::size_t BooleanMonitor::states_materialized() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return states_.size();
}

std::string BooleanMonitor::describe(std::uint32_t q) const {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto& a = states_.at(q);
  if (a.empty()) return "false";
  std::string out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i) out += " | ";
    out += store_.to_string(a[i]);
  }
  return out;
}

std::shared_ptr<const BooleanMonitor> brm_build(const Formula& f, double weight) {
  return std::make_shared<const BooleanMonitor>(f, weight);
}

BrmStep brm_step(const BooleanMonitor& bm, std::uint32_t q, const std::map<std::string, double>& labels) {
  const auto next = bm.step(q, labels_for(bm.atoms(), labels));
  return {next, bm.output(next)};
}

}  // namespace qmon
