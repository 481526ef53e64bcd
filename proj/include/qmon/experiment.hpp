#pragma once

// Batch experiments: runs x variants of train() on one environment, written
// out as per-run CSVs, a summary table and SVG learning curves.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qmon/compose.hpp"
#include "qmon/envs.hpp"
#include "qmon/learn.hpp"

namespace qmon {

// Every problem found in a config, one per line.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct SpecText {
  std::string formula;
  double weight;
  bool operator==(const SpecText&) const = default;
};

struct ExperimentConfig {
  static constexpr int kSchemaVersion = 1;

  std::string environment;
  std::vector<Variant> variants{Variant::Base, Variant::Boolean, Variant::Quantitative};
  // Unset lists mean the environment's own specification lists.
  std::optional<std::vector<SpecText>> boolean_specs;
  std::optional<std::vector<SpecText>> quantitative_specs;
  double zeta = 0.0;
  QLearnConfig qlearning;
  EmaConfig ema;
  std::size_t runs = 1;
  std::uint64_t seed = 0;  // run r uses seed + r for every variant
  std::size_t workers = 1;
  std::size_t final_window = 100;
  std::string out = "results";

  // Throws ConfigError listing every problem.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
  nlohmann::json to_json() const;
  // Checks cross-field constraints (environment exists, formulas parse over
  // its atoms, ...). Throws ConfigError.
  void validate() const;

  std::vector<SpecRewardPair> specs(const LabelledMdp& env, Mode mode) const;
};

struct SummaryRow {
  Variant variant;
  std::size_t runs = 0;
  std::size_t converged_runs = 0;
  std::optional<double> mean_episode;  // over converged runs
  std::optional<double> mean_seconds;
  double completion_mean = 0.0;  // fraction in [0,1]
  double completion_ci95 = 0.0;  // 1.96 * standard error
  bool suboptimal = false;       // more than 2 points below the best variant
};

// One line of runs.csv.
struct RunRow {
  Variant variant;
  std::uint64_t seed;
  std::optional<std::size_t> converged_episode;
  std::optional<double> converged_seconds;
  double final_completion;
  std::size_t product_tuples;
};

struct ExperimentResult {
  ExperimentConfig config;
  // Indexed like config.variants, then by run.
  std::vector<std::vector<RunResult>> runs;
  std::vector<SummaryRow> summary;
};

using Progress = std::function<void(Variant, std::size_t run, const RunResult&)>;

// Runs every (variant, run) job on a pool of config.workers threads.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const Progress& progress = {});

std::vector<RunRow> run_rows(const ExperimentResult& r);
std::vector<SummaryRow> summarize(const std::vector<RunRow>& rows);

// CSV schemas (header line first).
//   run:     episode,return,task_completion,epsilon,steps
//   runs:    variant,seed,converged_episode,converged_seconds,final_completion,product_tuples
//   summary: environment,variant,runs,converged_runs,mean_convergence_episode,
//            mean_convergence_seconds,completion_mean,completion_ci95,suboptimal
// Missing convergence is written as None.
void write_run_csv(std::ostream& os, const RunResult& r);
void write_runs_csv(std::ostream& os, const std::vector<RunRow>& rows);
void write_summary_csv(std::ostream& os, const std::string& environment, const std::vector<SummaryRow>& rows);
std::vector<RunRow> read_runs_csv(std::istream& is);

std::vector<double> moving_average(const std::vector<double>& xs, std::size_t window);
// Mean task completion per episode across runs, smoothed, one line per
// variant.
std::string completion_svg(const ExperimentResult& r, std::size_t window = 21);

// Writes config.json, runs/<variant>_<run>.csv, runs.csv, summary.csv and
// completion.svg under dir.
void write_outputs(const ExperimentResult& r, const std::string& dir);

}  // namespace qmon
