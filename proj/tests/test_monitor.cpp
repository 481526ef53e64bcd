#include <doctest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "qmon/fuzz.hpp"
#include "qmon/monitor.hpp"
#include "qmon/semantics.hpp"

using namespace qmon;

namespace {

using Labels = std::map<std::string, double>;

std::vector<double> rewards(const Qrm& m, const std::vector<Labels>& seq) {
  std::vector<double> out;
  MonitorState ms = init(m, seq.front());
  out.push_back(reward_value(ms, m));
  for (std::size_t i = 1; i < seq.size(); ++i) {
    step(m, ms, seq[i]);
    out.push_back(reward_value(ms, m));
  }
  return out;
}

// States visited from q0 before the first repeat: stem + cycle.
std::size_t reachable(const Qrm& m) {
  std::set<std::uint32_t> seen;
  for (std::uint32_t q = m.initial_state; seen.insert(q).second;) q = m.successor[q];
  return seen.size();
}

}  // namespace

TEST_CASE("running example has three states and the expected rewards") {
  const Qrm m = synth(parse("!a U (a & F b)"));
  CHECK(m.num_states() == 3);
  CHECK(m.successor[m.successor[m.successor[m.initial_state]]] == m.successor[m.initial_state]);
  const auto r = rewards(m, {{{"a", 0}, {"b", 0}}, {{"a", 0.8}, {"b", 0.2}}, {{"a", 0.8}, {"b", 0.9}}});
  CHECK(r[0] == doctest::Approx(0.0));
  // b is only 0.2 within the two-letter prefix
  CHECK(r[1] == doctest::Approx(0.2));
  CHECK(r[2] == doctest::Approx(0.8));
}

TEST_CASE("base cases") {
  const Qrm t = synth(Formula::top());
  CHECK(t.num_states() == 1);
  CHECK(t.successor[0] == 0);
  CHECK(reward_value(init(t, Labels{}), t) == 1.0);
  const Qrm p = synth(parse("p"));
  CHECK(p.num_states() == 2);
  CHECK(reward_value(init(p, Labels{{"p", 0.7}}), p) == 0.7);
  const Qrm g = synth(parse("G p"));
  CHECK(reward_value(init(g, Labels{{"p", 0.4}}), g) == 0.4);
}

TEST_CASE("temporal examples") {
  CHECK(rewards(synth(parse("G balanced")), {{{"balanced", 1.0}}, {{"balanced", 0.6}}, {{"balanced", 0.8}}}) ==
        std::vector<double>{1.0, 0.6, 0.6});
  CHECK(rewards(synth(parse("F b")), {{{"b", 0}}, {{"b", 0.3}}, {{"b", 0.1}}}) == std::vector<double>{0, 0.3, 0.3});
  const auto last = rewards(synth(parse("F G x")), {{{"x", 0.2}}, {{"x", 0.9}}, {{"x", 0.4}}, {{"x", 0.7}}});
  CHECK(last == std::vector<double>{0.2, 0.9, 0.4, 0.7});
  CHECK(rewards(synth(parse("G F x")), {{{"x", 0.2}}, {{"x", 0.9}}, {{"x", 0.4}}}) ==
        std::vector<double>{0.2, 0.9, 0.4});
}

TEST_CASE("reward applies the weight") {
  Qrm m = synth(parse("a"));
  m.weight = 50;
  CHECK(reward(init(m, Labels{{"a", 0.8}}), m) == doctest::Approx(40));
  m.weight = -10;
  CHECK(reward(init(m, Labels{{"a", 1.0}}), m) == -10);
  CHECK(reward(init(m, Labels{{"a", 0.0}}), m) == 0.0);
}

TEST_CASE("missing labels are rejected") {
  const Qrm m = synth(parse("a & b"));
  CHECK_THROWS_AS(init(m, Labels{{"a", 1}}), MissingLabel);
  std::vector<double> one{1.0};
  CHECK_THROWS_AS(init(m, one), MissingLabel);
}

TEST_CASE("memoization builds repeated subformulas once") {
  SynthCache cache;
  const Formula fb = parse("F b");
  synth(Formula::conj(fb, parse("F b")), cache);
  CHECK(cache.constructions(fb) == 1);
}

TEST_CASE("monitor matches the naive oracle on every prefix") {
  std::mt19937_64 rng(21);
  FormulaGen gen;
  gen.max_depth = 4;
  const std::vector<std::string> atoms{"a", "b", "c"};
  gen.atoms = atoms;
  for (int k = 0; k < 300; ++k) {
    const Formula f = random_formula(rng, gen);
    const Qrm m = synth(f);
    CHECK(m.exact);
    const Trace t = random_trace(rng, atoms, 1 + k % 6);
    oracle::Word w;
    MonitorState ms;
    for (std::size_t i = 1; i <= t.size(); ++i) {
      w.push_back(t.row_map(i));
      if (i == 1)
        ms = init(m, t.row_map(i));
      else
        step(m, ms, t.row_map(i));
      CAPTURE(to_string(f));
      CAPTURE(i);
      CHECK(std::abs(reward_value(ms, m) - oracle::naive(f, w, 1)) <= 1e-9);
      for (double v : ms.values) CHECK((v >= 0.0 && v <= 1.0));
    }
  }
}

TEST_CASE("state graphs are lassos and F/G registers are monotone") {
  std::mt19937_64 rng(22);
  FormulaGen gen;
  for (int k = 0; k < 300; ++k) {
    const Formula f = random_formula(rng, gen);
    const Qrm m = synth(f);
    CHECK(reachable(m) == m.num_states());
    CHECK(lasso_shape(f).states() == m.num_states());
  }
  for (const char* text : {"F (a & X b)", "G (a | b U c)"}) {
    const Formula f = parse(text);
    const Qrm m = synth(f);
    const Trace t = random_trace(rng, {"a", "b", "c"}, 10);
    MonitorState ms = init(m, t.row_map(1));
    double prev = reward_value(ms, m);
    for (std::size_t i = 2; i <= t.size(); ++i) {
      step(m, ms, t.row_map(i));
      const double v = reward_value(ms, m);
      if (f.op() == Op::Eventually)
        CHECK(v >= prev);
      else
        CHECK(v <= prev);
      prev = v;
    }
  }
}

TEST_CASE("replays are deterministic") {
  const Qrm m = synth(parse("(a U b) R (F c)"));
  std::mt19937_64 rng(3);
  const Trace t = random_trace(rng, {"a", "b", "c"}, 9);
  MonitorState x = init(m, t.row_map(1)), y = init(m, t.row_map(1));
  for (std::size_t i = 2; i <= t.size(); ++i) {
    step(m, x, t.row_map(i));
    step(m, y, t.row_map(i));
    CHECK(x.values == y.values);
    CHECK(x.q == y.q);
  }
}

TEST_CASE("serialization and DOT mention every state") {
  const Qrm m = synth(parse("!a U (a & F b)"));
  const std::string s = serialize(m);
  CHECK(s.find("states 3") != std::string::npos);
  CHECK(s.find("reward ") != std::string::npos);
  const std::string dot = to_dot(m);
  CHECK(dot.find("q2 -> q1") != std::string::npos);
}

TEST_CASE("Boolean monitor examples") {
  const auto bm = brm_build(parse("!a U (a & F b)"));
  std::uint32_t q = bm->start();
  std::vector<int> out;
  for (auto [a, b] : {std::pair{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}) {
    const auto s = brm_step(*bm, q, {{"a", a}, {"b", b}});
    q = s.state;
    out.push_back(s.output);
  }
  CHECK(out == std::vector<int>{0, 0, 1});

  const auto g = brm_build(parse("G !a"));
  q = g->start();
  out.clear();
  for (double a : {0.0, 0.0, 1.0, 0.0, 0.0}) {
    q = brm_step(*g, q, {{"a", a}}).state;
    out.push_back(g->output(q));
  }
  CHECK(out == std::vector<int>{1, 1, 0, 0, 0});
  CHECK(g->is_bottom(q));

  const auto t = brm_build(Formula::top());
  CHECK(brm_step(*t, t->start(), {}).output == 1);
  CHECK_THROWS_AS(brm_step(*g, g->start(), {{"a", 0.5}}), NonCrispLabel);
}

TEST_CASE("Boolean monitor agrees with classical satisfaction") {
  std::mt19937_64 rng(23);
  FormulaGen gen;
  gen.max_depth = 4;
  const std::vector<std::string> atoms{"a", "b", "c", "d"};
  for (int k = 0; k < 300; ++k) {
    const Formula f = random_formula(rng, gen);
    const BooleanMonitor bm(f);
    const Trace t = random_trace(rng, atoms, 1 + k % 7, 2);
    oracle::Word w;
    std::uint32_t q = bm.start();
    for (std::size_t i = 1; i <= t.size(); ++i) {
      w.push_back(t.row_map(i));
      q = brm_step(bm, q, t.row_map(i)).state;
      CAPTURE(to_string(f));
      CHECK(bm.output(q) == static_cast<int>(oracle::classical(f, w, 1)));
    }
  }
}
