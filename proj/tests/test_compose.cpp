#include <doctest.h>

#include <algorithm>
#include <random>

#include "qmon/compose.hpp"
#include "qmon/fuzz.hpp"
#include "qmon/semantics.hpp"

using namespace qmon;

namespace {

using Labels = std::map<std::string, double>;
const std::vector<std::string> kU{"goal", "hole", "a", "b"};

Labels letter(double goal, double hole) { return {{"goal", goal}, {"hole", hole}, {"a", 0}, {"b", 0}}; }

}  // namespace

TEST_CASE("a single pair behaves like its monitor") {
  const auto cm = compose({SpecRewardPair("F goal", 10, Mode::Quantitative)}, 0.0, kU);
  CompositeState st;
  const Qrm m = synth(parse("F goal"));
  MonitorState ms;
  const std::vector<double> g{0.1, 0.5, 0.3};
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = composite_step(*cm, st, letter(g[i], 0), letter(g[i], 0));
    if (i == 0)
      ms = init(m, Labels{{"goal", g[i]}});
    else
      step(m, ms, Labels{{"goal", g[i]}});
    CHECK(r == doctest::Approx(10 * reward_value(ms, m)));
  }
}

TEST_CASE("sum before the violation, zeta from it on") {
  for (Mode mode : {Mode::Quantitative, Mode::Boolean})
    for (double zeta : {0.0, -5.0}) {
      const auto cm = compose({SpecRewardPair("G !hole", -10, mode), SpecRewardPair("F goal", 10, mode)}, zeta, kU);
      CHECK(cm->pair(0).safety());
      CHECK_FALSE(cm->pair(1).safety());
      CompositeState st;
      CHECK(composite_step(*cm, st, letter(0, 0), letter(0, 0)) == doctest::Approx(-10));
      CHECK(composite_step(*cm, st, letter(1, 0), letter(1, 0)) == doctest::Approx(0));
      CHECK(composite_step(*cm, st, letter(0, 1), letter(0, 1)) == zeta);
      CHECK(composite_step(*cm, st, letter(1, 0), letter(1, 0)) == zeta);
      CHECK(st.violated);
    }
}

TEST_CASE("time penalty idiom") {
  const auto cm = compose({SpecRewardPair("G true", -1, Mode::Quantitative)}, 0.0, kU);
  CompositeState st;
  for (int i = 0; i < 5; ++i) CHECK(composite_step(*cm, st, letter(0, 0), letter(0, 0)) == -1);
}

TEST_CASE("construction errors") {
  CHECK_THROWS_AS(compose({}, 0.0, kU), ComposeError);
  CHECK_THROWS_AS(compose({SpecRewardPair("F goal", 1, Mode::Boolean)}, 1.0, kU), ComposeError);
  CHECK_THROWS_AS(compose({SpecRewardPair("F nowhere", 1, Mode::Boolean)}, 0.0, kU), ComposeError);
  const auto cm = compose({SpecRewardPair("F goal", 1, Mode::Boolean)}, 0.0, kU);
  CompositeState st;
  CHECK_THROWS(composite_step(*cm, st, {{"goal", 1}}, letter(1, 0)));
}

TEST_CASE("additivity, order independence and latching on random bundles") {
  std::mt19937_64 rng(41);
  FormulaGen gen;
  gen.atoms = {"a", "b", "goal", "hole"};
  gen.max_depth = 3;
  std::uniform_real_distribution<double> w(-5, 5);
  for (int k = 0; k < 200; ++k) {
    std::vector<SpecRewardPair> pairs;
    for (int i = 0; i < 3; ++i) pairs.emplace_back(random_formula(rng, gen), w(rng), Mode::Quantitative);
    auto shuffled = pairs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const CompositeMonitor x(pairs, -3.0, kU), y(shuffled, -3.0, kU);
    const Trace t = random_trace(rng, kU, 8);
    CompositeState sx, sy;
    std::vector<MonitorState> solo(pairs.size());
    std::vector<Qrm> ms;
    for (const auto& p : pairs) ms.push_back(synth(p.formula()));
    bool latched = false;
    for (std::size_t i = 1; i <= t.size(); ++i) {
      const double rx = x.step(sx, t.row(i), t.row(i));
      const double ry = y.step(sy, t.row(i), t.row(i));
      CHECK(rx == doctest::Approx(ry).epsilon(1e-12));
      double sum = 0.0;
      for (std::size_t c = 0; c < pairs.size(); ++c) {
        const auto row = t.row_map(i);
        if (i == 1)
          solo[c] = init(ms[c], row);
        else
          step(ms[c], solo[c], row);
        const double v = reward_value(solo[c], ms[c]);
        sum += v * pairs[c].weight();
        if (pairs[c].safety() && v <= 1e-9) latched = true;
      }
      CHECK(sx.violated == latched);
      CHECK(rx == doctest::Approx(latched ? -3.0 : sum).epsilon(1e-9));
    }
  }
}
