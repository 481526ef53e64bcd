#include <doctest.h>

#include <random>

#include "qmon/envs.hpp"

using namespace qmon;

TEST_CASE("distance helpers") {
  const auto& fl = GridMap::builtin("frozen_lake");
  CHECK(bfs_distance(fl, fl.find_one('S'), fl.find_one('G'), "H") == 6);
  CHECK(bfs_distance(fl, {2, 2}, {2, 2}) == 0);
  const GridMap boxed = GridMap::parse("; enclosed goal\n.#.\n##.\n...\n");
  CHECK_FALSE(bfs_distance(boxed, {2, 2}, {0, 0}, "#").has_value());
  CHECK_THROWS_AS(bfs_distance(boxed, {5, 0}, {0, 0}), EnvError);
  CHECK(manhattan({0, 0}, {3, 3}) == 6);
  CHECK(manhattan({1, 2}, {1, 2}) == 0);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> r(0, 3);
  for (int k = 0; k < 50; ++k) {
    const Cell a{r(rng), r(rng)}, b{r(rng), r(rng)};
    const auto ab = bfs_distance(fl, a, b, ""), ba = bfs_distance(fl, b, a, "");
    CHECK(ab == ba);
    CHECK(*ab >= manhattan(a, b));
  }
}

TEST_CASE("distance normalizers of the pinned maps") {
  const auto& island = GridMap::builtin("island_navigation");
  CHECK(island.width() == 8);
  CHECK(island.height() == 6);
  CHECK(manhattan({0, 0}, {island.height() - 1, island.width() - 1}) == 12);
  CHECK(envs::taxi_max_bfs() == 8);
  const auto cliff = make_env("cliff_walking");
  const Cell start = GridMap::builtin("cliff_walking").find_one('S');
  CHECK(cliff->task_completion(static_cast<std::uint32_t>(start.row * 12 + start.col)) ==
        doctest::Approx(1.0 - 13.0 / 14.0));
}

TEST_CASE("cliff walking decoding and rewards") {
  const Cell c = envs::cliff_decode(37);
  CHECK(c.row == 3);
  CHECK(c.col == 1);
  const auto env = make_env("cliff_walking");
  Rng rng(0);
  const auto s = env->reset(rng);
  CHECK(s == 36);
  const auto up = env->step(s, 0, rng);
  CHECK(up.reward == -1.0);
  CHECK_FALSE(up.terminal);
  const auto cliff = env->step(s, 1, rng);
  CHECK(cliff.reward == -100.0);
  CHECK(cliff.terminal);
  CHECK(env->task_completion(cliff.next) == 0.0);
}

TEST_CASE("frozen lake completion") {
  const auto env = make_env("frozen_lake");
  CHECK(env->task_completion(15) == 1.0);
  CHECK(env->task_completion(5) == 0.0);
  // strictly closer to the goal means strictly more complete
  CHECK(env->task_completion(14) > env->task_completion(13));
  CHECK(env->task_completion(13) > env->task_completion(9));
  CHECK(env->task_completion(0) == doctest::Approx(0.0));
}

TEST_CASE("taxi encoding and two-halves completion") {
  const auto env = make_env("taxi");
  for (std::uint32_t s = 0; s < 500; ++s) CHECK(envs::taxi_encode(envs::taxi_decode(s)) == s);
  const Cell R{0, 0};
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) {
      const int d = envs::taxi_bfs({r, c}, R);
      const auto carrying = envs::taxi_encode({r, c, 4, 0});
      CHECK(env->task_completion(carrying) == doctest::Approx(0.5 + 0.5 * (1.0 - d / 8.0)));
      const auto waiting = envs::taxi_encode({r, c, 0, 1});
      CHECK(env->task_completion(waiting) == doctest::Approx(0.5 * (1.0 - d / 8.0)));
    }
  CHECK(env->task_completion(envs::taxi_encode({0, 0, 0, 0})) == 1.0);
  // a wall separates (0,1) from (0,2)
  Rng rng(0);
  const auto s = envs::taxi_encode({0, 1, 0, 1});
  const auto t = env->step(s, 2, rng);
  CHECK(t.next == s);
  std::vector<double> b(7), q(7);
  env->label(s, 2, t.next, b, q);
  CHECK(b[2] == 1.0);  // hit_wall
}

TEST_CASE("sokoban wall penalty") {
  const GridMap room = GridMap::parse("#####\n#   #\n#   #\n#   #\n#####\n");
  CHECK(envs::sokoban_wall_penalty(room, {1, 1}) == 1.0);
  CHECK(envs::sokoban_wall_penalty(room, {1, 2}) == 0.5);
  CHECK(envs::sokoban_wall_penalty(room, {2, 2}) == 0.0);
  CHECK(envs::sokoban_wall_penalty(room, {3, 3}) == 1.0);
}

TEST_CASE("conveyor belt breaks the vase without terminating") {
  const auto env = make_env("conveyor_belt");
  Rng rng(0);
  auto s = env->reset(rng);
  std::vector<double> b(3), q(3);
  bool terminal = false;
  for (int i = 0; i < 8; ++i) {
    const auto t = env->step(s, 0, rng);  // bump into the north wall
    terminal = terminal || t.terminal;
    s = t.next;
  }
  env->label_initial(s, b, q);
  CHECK(b[0] == 1.0);
  CHECK(q[0] == 1.0);
  CHECK_FALSE(terminal);
  CHECK(env->task_completion(s) == 0.0);
}

TEST_CASE("labels stay in range, Boolean labels are crisp, seeds replay") {
  for (const auto& name : env_names()) {
    CAPTURE(name);
    const auto env = make_env(name);
    const std::size_t n = env->atoms().size();
    std::vector<double> b(n), q(n);
    std::vector<std::uint32_t> first;
    for (int pass = 0; pass < 2; ++pass) {
      Rng rng(99);
      std::uniform_int_distribution<std::uint32_t> act(0, env->num_actions() - 1);
      auto s = env->reset(rng);
      std::vector<std::uint32_t> seen;
      for (int i = 0; i < 400; ++i) {
        const auto a = act(rng);
        const auto t = env->step(s, a, rng);
        CHECK(t.next < env->num_states());
        env->label(s, a, t.next, b, q);
        for (std::size_t k = 0; k < n; ++k) {
          CHECK((b[k] == 0.0 || b[k] == 1.0));
          CHECK((q[k] >= 0.0 && q[k] <= 1.0));
        }
        const double c = env->task_completion(t.next);
        CHECK((c >= 0.0 && c <= 1.0));
        seen.push_back(t.next);
        s = t.terminal ? env->reset(rng) : t.next;
      }
      if (pass == 0)
        first = seen;
      else
        CHECK(seen == first);
    }
  }
}

TEST_CASE("errors") {
  CHECK_THROWS_AS(make_env("nowhere"), EnvError);
  CHECK_THROWS_AS(parse_variant("fast"), EnvError);
  const auto env = make_env("frozen_lake");
  CHECK_THROWS_AS(task_completion(*env, 0, false), EnvError);
  CHECK(task_completion(*env, 15, true) == 1.0);
  Rng rng(0);
  CompositeState st;
  CHECK_THROWS_AS(product_step(*env, 0, 9, nullptr, st, rng), EnvError);
}

TEST_CASE("product step emits the monitor reward, terminal included") {
  const auto env = make_env("frozen_lake");
  const auto cm = compose(env->specs(Mode::Quantitative), 0.0, env->atoms());
  Rng rng(0);
  CompositeState st;
  auto s = env->reset(rng);
  product_start(*env, s, *cm, st);
  // down, down, right, right, down, right reaches the goal
  double total = 0.0;
  ProductStep ps{};
  for (std::uint32_t a : {1u, 1u, 2u, 2u, 1u, 2u}) {
    ps = product_step(*env, s, a, cm.get(), st, rng);
    total += ps.reward;
    s = ps.next;
  }
  CHECK(ps.done);
  CHECK(s == 15);
  // F goal pays 10 only on the last step; G !hole costs 10 and F G true 1 per step.
  CHECK(total == doctest::Approx(10.0 - 11.0 * 6));
}
