#include <doctest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "qmon/fuzz.hpp"
#include "qmon/semantics.hpp"

using namespace qmon;

namespace {

oracle::Word word(const Trace& t) {
  oracle::Word w;
  for (std::size_t i = 1; i <= t.size(); ++i) w.push_back(t.row_map(i));
  return w;
}

Trace make(const std::vector<std::map<std::string, double>>& rows) {
  std::vector<std::string> atoms;
  for (const auto& [k, v] : rows.front()) atoms.push_back(k);
  Trace t(atoms);
  for (const auto& r : rows) t.push(r);
  return t;
}

}  // namespace

TEST_CASE("worked values") {
  const Formula f = parse("!a U (a & F b)");
  const Trace fuzzy = make({{{"a", 0}, {"b", 0}}, {{"a", 0.8}, {"b", 0.2}}, {{"a", 0.8}, {"b", 0.9}}});
  CHECK(evaluate(f, fuzzy, 1) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(evaluate(f, fuzzy.prefix(2), 1) == doctest::Approx(0.2));
  const Trace crisp = make({{{"a", 0}, {"b", 0}}, {{"a", 1}, {"b", 0}}, {{"a", 0}, {"b", 1}}});
  CHECK(evaluate(f, crisp, 1) == 1.0);
  CHECK(evaluate(Formula::top(), fuzzy, 2) == 1.0);
  CHECK(evaluate(parse("X a"), fuzzy, 3) == 0.0);
  CHECK(evaluate(parse("a U b"), fuzzy, 3) == doctest::Approx(0.9));
}

TEST_CASE("index and atom errors") {
  const Trace t = make({{{"a", 0.5}}});
  CHECK_THROWS_AS(evaluate(parse("a"), t, 0), TraceError);
  CHECK_THROWS_AS(evaluate(parse("a"), t, 2), TraceError);
  CHECK_THROWS(evaluate(parse("zz"), t, 1));
  Trace u(std::vector<std::string>{"a"});
  CHECK_THROWS_AS(u.push(std::vector<double>{1.5}), TraceError);
  CHECK_THROWS_AS(u.push(std::vector<double>{0.1, 0.2}), TraceError);
}

TEST_CASE("memoized evaluator agrees with the naive oracle") {
  std::mt19937_64 rng(5);
  FormulaGen gen;
  gen.max_depth = 4;
  const std::vector<std::string> atoms{"a", "b", "c", "d"};
  for (int k = 0; k < 300; ++k) {
    const Formula f = random_formula(rng, gen);
    const Trace t = random_trace(rng, atoms, 1 + k % 5);
    const auto w = word(t);
    for (std::size_t i = 1; i <= t.size(); ++i) {
      CAPTURE(to_string(f));
      CHECK(std::abs(evaluate(f, t, i) - oracle::naive(f, w, i)) <= 1e-12);
    }
  }
}

TEST_CASE("crisp traces reduce to classical satisfaction") {
  std::mt19937_64 rng(6);
  FormulaGen gen;
  gen.max_depth = 4;
  const std::vector<std::string> atoms{"a", "b", "c", "d"};
  for (int k = 0; k < 300; ++k) {
    const Formula f = random_formula(rng, gen);
    const Trace t = random_trace(rng, atoms, 1 + k % 6, 2);
    const auto w = word(t);
    for (std::size_t i = 1; i <= t.size(); ++i) {
      const double v = evaluate(f, t, i);
      CHECK((v == 0.0 || v == 1.0));
      CHECK((v == 1.0) == oracle::classical(f, w, i));
    }
  }
}

TEST_CASE("algebraic identities") {
  std::mt19937_64 rng(7);
  FormulaGen gen;
  gen.max_depth = 4;
  const std::vector<std::string> atoms{"a", "b", "c", "d"};
  for (int k = 0; k < 300; ++k) {
    const Formula f = random_formula(rng, gen);
    const Formula g = random_formula(rng, gen);
    const Trace t = random_trace(rng, atoms, 1 + k % 8);
    for (std::size_t i = 1; i <= t.size(); ++i) {
      const double v = evaluate(f, t, i);
      CHECK((v >= 0.0 && v <= 1.0));
      CHECK(evaluate(Formula::negation(f), t, i) == 1.0 - v);
      CHECK(std::abs(evaluate(Formula::eventually(f), t, i) - evaluate(Formula::until(Formula::top(), f), t, i)) <= 1e-12);
      CHECK(std::abs(evaluate(Formula::always(f), t, i) - evaluate(Formula::release(Formula::bottom(), f), t, i)) <= 1e-12);
      const Formula dm = Formula::negation(Formula::conj(Formula::negation(f), Formula::negation(g)));
      CHECK(std::abs(evaluate(Formula::disj(f, g), t, i) - evaluate(dm, t, i)) <= 1e-12);
      CHECK(std::abs(evaluate(f, t, i) - evaluate(to_nnf(f), t, i)) <= 1e-9);
      if (i < t.size()) {
        CHECK(evaluate(Formula::eventually(f), t, i) ==
              std::max(v, evaluate(Formula::eventually(f), t, i + 1)));
        CHECK(evaluate(Formula::always(f), t, i) == std::min(v, evaluate(Formula::always(f), t, i + 1)));
      }
    }
  }
}

TEST_CASE("trace files round trip") {
  std::mt19937_64 rng(8);
  const Trace t = random_trace(rng, {"a", "b"}, 4);
  std::stringstream ss;
  write_trace(ss, t);
  const Trace back = read_trace(ss);
  REQUIRE(back.size() == t.size());
  for (std::size_t i = 1; i <= t.size(); ++i) CHECK(back.row_map(i) == t.row_map(i));
  std::stringstream bad("{\"atoms\":[\"a\"]}\n{\"b\":1}\n");
  CHECK_THROWS(read_trace(bad));
}
