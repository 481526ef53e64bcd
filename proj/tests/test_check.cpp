#include <doctest.h>

#include "qmon/check.hpp"

using namespace qmon;

TEST_CASE("small suites pass") {
  for (Suite s : {Suite::Oracle, Suite::Linearity, Suite::Crisp, Suite::Veto}) {
    CAPTURE(suite_name(s));
    CheckOptions o;
    o.seed = 11;
    o.formulas = 40;
    o.traces = 5;
    const auto rep = run_check(s, o);
    CHECK(rep.passed());
    CHECK(rep.cases == 40);
    CHECK(rep.checks > 0);
    CHECK_FALSE(rep.counterexample);
    CHECK(rep.summary().find(std::string(suite_name(s))) != std::string::npos);
  }
  CHECK(parse_suite("crisp") == Suite::Crisp);
  CHECK_THROWS_AS(parse_suite("fuzzy"), std::invalid_argument);
}

TEST_CASE("reports are reproducible per seed") {
  CheckOptions o;
  o.seed = 4;
  o.formulas = 30;
  const auto a = run_check(Suite::Oracle, o), b = run_check(Suite::Oracle, o);
  CHECK(a.checks == b.checks);
  CHECK(a.worst == b.worst);
}

TEST_CASE("predicates agree on sound monitors") {
  Trace t({"a", "b"});
  t.push(std::vector<double>{0.2, 0.9});
  t.push(std::vector<double>{0.7, 0.1});
  t.push(std::vector<double>{1.0, 0.4});
  CHECK_FALSE(oracle_divergence(parse("a U X b"), t));
  CHECK_FALSE(oracle_divergence(parse("G F a & F G !b"), t));
  Trace crisp({"a"});
  crisp.push(std::vector<double>{1.0});
  crisp.push(std::vector<double>{0.0});
  CHECK_FALSE(crisp_divergence(parse("G a | X !a"), crisp));
}

TEST_CASE("shrinker minimizes an injected divergence") {
  // Pretend any formula mentioning b misbehaves once some letter has a > 0.5.
  const Divergence fake = [](const Formula& f, const Trace& tr) -> std::optional<std::size_t> {
    if (!atoms(f).count("b")) return std::nullopt;
    for (std::size_t i = 1; i <= tr.size(); ++i)
      if (tr.value(i, 0) > 0.5) return i;
    return std::nullopt;
  };
  Trace t({"a", "b"});
  for (double a : {0.1, 0.2, 0.9, 0.3, 0.8, 0.0}) t.push(std::vector<double>{a, 0.5});
  const Formula big = parse("(a U (X b & G a)) | F (c & !b)");
  REQUIRE(fake(big, t));
  const Counterexample cx = shrink(big, t, fake);
  CHECK(cx.trace.size() == 1);
  CHECK(cx.trace.value(1, 0) > 0.5);
  CHECK(to_string(cx.formula) == "b");
  CHECK(cx.index == 1);
}
