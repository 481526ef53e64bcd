#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qmon/experiment.hpp"

using namespace qmon;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json tiny() {
  return json{{"schema_version", 1},
              {"environment", "frozen_lake"},
              {"variants", {"base", "quantitative"}},
              {"episodes", 40},
              {"runs", 2},
              {"seed", 3},
              {"workers", 1}};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = ExperimentConfig::from_json(tiny());
  CHECK(cfg.environment == "frozen_lake");
  CHECK(cfg.variants == std::vector<Variant>{Variant::Base, Variant::Quantitative});
  CHECK(cfg.qlearning.episodes == 40);
  CHECK_FALSE(cfg.boolean_specs);
  const auto back = ExperimentConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());

  json custom = tiny();
  custom["specs"] = json::array({{{"formula", "F reach_goal"}, {"weight", 2}}});
  const auto c2 = ExperimentConfig::from_json(custom);
  REQUIRE(c2.quantitative_specs);
  CHECK(c2.boolean_specs == c2.quantitative_specs);
  const auto env = make_env("frozen_lake");
  const auto pairs = c2.specs(*env, Mode::Quantitative);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].weight() == 2.0);
  CHECK(c2.specs(*env, Mode::Boolean)[0].mode() == Mode::Boolean);
}

TEST_CASE("config errors are all reported") {
  json bad = tiny();
  bad["schema_version"] = 2;
  bad["environment"] = "moon";
  bad["runs"] = 0;
  bad["zeta"] = 3.0;
  bad["colour"] = "blue";
  bad["qlearning"] = {{"alpha", 0.0}};
  try {
    ExperimentConfig::from_json(bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    std::string all;
    for (const auto& p : e.problems()) all += p + "\n";
    CAPTURE(all);
    CHECK(e.problems().size() >= 6);
    CHECK(all.find("schema_version") != std::string::npos);
    CHECK(all.find("moon") != std::string::npos);
    CHECK(all.find("colour") != std::string::npos);
    CHECK(all.find("zeta") != std::string::npos);
    CHECK(all.find("alpha") != std::string::npos);
  }
  json unparsable = tiny();
  unparsable["specs"] = {{"boolean", json::array({{{"formula", "F (reach_goal"}, {"weight", 1}}})},
                         {"quantitative", "default"}};
  CHECK_THROWS_AS(ExperimentConfig::from_json(unparsable), ConfigError);
  json unknown_atom = tiny();
  unknown_atom["specs"] = json::array({{{"formula", "F treasure"}, {"weight", 1}}});
  CHECK_THROWS_AS(ExperimentConfig::from_json(unknown_atom), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::load("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("experiment outputs") {
  const auto cfg = ExperimentConfig::from_json(tiny());
  const auto res = run_experiment(cfg);
  REQUIRE(res.runs.size() == 2);
  REQUIRE(res.runs[0].size() == 2);
  CHECK(res.runs[0][1].seed == 4);
  CHECK(res.runs[1][1].seed == 4);

  // Same jobs on more workers give identical results.
  auto cfg2 = cfg;
  cfg2.workers = 3;
  const auto res2 = run_experiment(cfg2);
  for (std::size_t v = 0; v < 2; ++v)
    for (std::size_t k = 0; k < 2; ++k) {
      std::ostringstream a, b;
      write_run_csv(a, res.runs[v][k]);
      write_run_csv(b, res2.runs[v][k]);
      CHECK(a.str() == b.str());
    }

  SUBCASE("golden per-run csv") {
    std::ostringstream os;
    write_run_csv(os, res.runs[1][0]);
    const fs::path golden = fs::path(QMON_GOLDEN_DIR) / "frozen_lake_quantitative_000.csv";
    if (std::getenv("QMON_UPDATE_GOLDEN")) std::ofstream(golden) << os.str();
    const std::string want = slurp(golden);
    REQUIRE_FALSE(want.empty());
    CHECK(os.str() == want);
    CHECK(os.str().rfind("episode,return,task_completion,epsilon,steps\n", 0) == 0);
  }

  SUBCASE("runs csv round trip") {
    const auto rows = run_rows(res);
    std::ostringstream os;
    write_runs_csv(os, rows);
    std::istringstream is(os.str());
    const auto back = read_runs_csv(is);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(back[i].variant == rows[i].variant);
      CHECK(back[i].seed == rows[i].seed);
      CHECK(back[i].converged_episode == rows[i].converged_episode);
      CHECK(back[i].final_completion == rows[i].final_completion);
      CHECK(back[i].product_tuples == rows[i].product_tuples);
    }
    const auto a = summarize(rows), b = summarize(back);
    std::ostringstream sa, sb;
    write_summary_csv(sa, "frozen_lake", a);
    write_summary_csv(sb, "frozen_lake", b);
    CHECK(sa.str() == sb.str());
  }

  SUBCASE("files and svg") {
    const fs::path dir = fs::temp_directory_path() / "qmon_experiment_test";
    fs::remove_all(dir);
    write_outputs(res, dir.string());
    for (const char* f : {"config.json", "runs.csv", "summary.csv", "completion.svg", "runs/base_000.csv",
                          "runs/quantitative_001.csv"})
      CHECK_MESSAGE(fs::exists(dir / f), f);
    CHECK(completion_svg(res) == completion_svg(res2));
    CHECK(completion_svg(res).find("<svg") != std::string::npos);
    const auto reread = ExperimentConfig::load((dir / "config.json").string());
    CHECK(reread.to_json() == res.config.to_json());
    fs::remove_all(dir);
  }
}

TEST_CASE("summary statistics") {
  std::vector<RunRow> rows{
      {Variant::Base, 0, 200, 1.0, 0.5, 10},
      {Variant::Base, 1, std::nullopt, std::nullopt, 0.7, 10},
      {Variant::Quantitative, 0, std::nullopt, std::nullopt, 0.9, 12},
  };
  const auto s = summarize(rows);
  REQUIRE(s.size() == 2);
  CHECK(s[0].runs == 2);
  CHECK(s[0].converged_runs == 1);
  CHECK(*s[0].mean_episode == 200.0);
  CHECK(s[0].completion_mean == doctest::Approx(0.6));
  CHECK(s[0].completion_ci95 == doctest::Approx(1.96 * std::sqrt(0.02 / 2.0)));
  CHECK(s[0].suboptimal);
  CHECK_FALSE(s[1].mean_episode);
  CHECK_FALSE(s[1].suboptimal);
  std::ostringstream os;
  write_summary_csv(os, "x", s);
  CHECK(os.str().find("None") != std::string::npos);
}

TEST_CASE("no convergence is written as None") {
  json j = tiny();
  j["runs"] = 1;
  j["episodes"] = 0;
  j["variants"] = {"base"};
  const auto res = run_experiment(ExperimentConfig::from_json(j));
  std::ostringstream os;
  write_runs_csv(os, run_rows(res));
  CHECK(os.str().find(",None,None,") != std::string::npos);
}

TEST_CASE("moving average") {
  const auto m = moving_average({1, 2, 3, 4, 5}, 3);
  REQUIRE(m.size() == 5);
  CHECK(m[0] == 1.0);
  CHECK(m[1] == 1.5);
  CHECK(m[2] == 2.0);
  CHECK(m[3] == 3.0);
  CHECK(m[4] == 4.0);
  CHECK(moving_average({}, 21).empty());
}
