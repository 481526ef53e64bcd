#include "qmon/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace qmon {

namespace {

using nlohmann::json;

std::string join(const std::vector<std::string>& xs) {
  std::string out;
  for (const auto& x : xs) out += (out.empty() ? "" : "\n") + x;
  return out;
}

std::string num(double v, int digits = 10) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// Reads typed fields out of a JSON object, recording problems instead of
// throwing so a config reports all of them at once.
class Reader {
 public:
  Reader(const json& j, std::string where, std::vector<std::string>& problems)
      : j_(j), where_(std::move(where)), problems_(problems) {
    if (!j_.is_object()) problem("", "must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.is_object() || !j_.contains(key)) return;
    const json& v = j_.at(key);
    try {
      if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_integer() || v.get<long long>() < 0) throw std::invalid_argument("");
      } else if constexpr (std::is_arithmetic_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw std::invalid_argument("");
      }
      out = v.get<T>();
    } catch (const std::exception&) {
      problem(key, std::is_unsigned_v<T> ? "must be a non-negative integer"
                   : std::is_arithmetic_v<T> ? "must be a number"
                                             : "must be a string");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.is_object() && j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() {
    if (!j_.is_object()) return;
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) problem(k, "is not a known key");
  }

  void problem(const std::string& key, const std::string& what) {
    problems_.push_back(where_ + (key.empty() ? "" : (where_.empty() ? "" : ".") + key) + " " + what);
  }

 private:
  const json& j_;
  std::string where_;
  std::vector<std::string>& problems_;
  std::set<std::string> seen_;
};

std::optional<std::vector<SpecText>> read_specs(const json& j, const std::string& where,
                                                std::vector<std::string>& problems) {
  if (j.is_string()) {
    if (j.get<std::string>() != "default") problems.push_back(where + " must be \"default\" or a list");
    return std::nullopt;
  }
  if (!j.is_array()) {
    problems.push_back(where + " must be \"default\" or a list");
    return std::nullopt;
  }
  std::vector<SpecText> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    Reader r(j[i], where + "[" + std::to_string(i) + "]", problems);
    SpecText s{"", 0.0};
    bool has_formula = j[i].is_object() && j[i].contains("formula");
    bool has_weight = j[i].is_object() && j[i].contains("weight");
    r.get("formula", s.formula);
    r.get("weight", s.weight);
    if (!has_formula) r.problem("formula", "is required");
    if (!has_weight) r.problem("weight", "is required");
    r.finish();
    out.push_back(std::move(s));
  }
  if (out.empty()) problems.push_back(where + " must not be empty");
  return out;
}

json specs_json(const std::optional<std::vector<SpecText>>& s) {
  if (!s) return "default";
  json a = json::array();
  for (const auto& x : *s) a.push_back({{"formula", x.formula}, {"weight", x.weight}});
  return a;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::invalid_argument(join(problems)), problems_(std::move(problems)) {}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  std::vector<std::string> problems;
  ExperimentConfig c;
  Reader r(j, "", problems);
  int schema = -1;
  r.get("schema_version", schema);
  if (schema != kSchemaVersion)
    problems.push_back("schema_version must be " + std::to_string(kSchemaVersion));
  r.get("environment", c.environment);
  if (const json* v = r.child("variants")) {
    c.variants.clear();
    if (!v->is_array()) problems.push_back("variants must be a list");
    else
      for (const auto& x : *v) {
        try {
          c.variants.push_back(parse_variant(x.is_string() ? x.get<std::string>() : std::string("?")));
        } catch (const std::exception& e) {
          problems.push_back(std::string("variants: ") + e.what());
        }
      }
  }
  if (const json* s = r.child("specs")) {
    if (s->is_object()) {
      Reader sr(*s, "specs", problems);
      if (const json* b = sr.child("boolean")) c.boolean_specs = read_specs(*b, "specs.boolean", problems);
      if (const json* q = sr.child("quantitative"))
        c.quantitative_specs = read_specs(*q, "specs.quantitative", problems);
      sr.finish();
    } else {
      c.boolean_specs = read_specs(*s, "specs", problems);
      c.quantitative_specs = c.boolean_specs;
    }
  }
  r.get("zeta", c.zeta);
  if (const json* q = r.child("qlearning")) {
    Reader qr(*q, "qlearning", problems);
    qr.get("alpha", c.qlearning.alpha);
    qr.get("gamma", c.qlearning.gamma);
    qr.get("epsilon0", c.qlearning.epsilon0);
    qr.get("epsilon_decay", c.qlearning.epsilon_decay);
    qr.get("epsilon_min", c.qlearning.epsilon_min);
    qr.get("max_steps", c.qlearning.max_steps);
    qr.finish();
  }
  if (const json* e = r.child("convergence")) {
    Reader er(*e, "convergence", problems);
    er.get("span", c.ema.span);
    er.get("pairs", c.ema.pairs);
    er.get("tau_min", c.ema.tau_min);
    er.get("tau_max", c.ema.tau_max);
    er.get("scale_floor", c.ema.scale_floor);
    er.finish();
  }
  r.get("episodes", c.qlearning.episodes);
  r.get("runs", c.runs);
  r.get("seed", c.seed);
  r.get("workers", c.workers);
  r.get("final_window", c.final_window);
  r.get("out", c.out);
  r.finish();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    problems.insert(problems.end(), e.problems().begin(), e.problems().end());
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open " + path});
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError({path + ": " + e.what()});
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  json v = json::array();
  for (auto x : variants) v.push_back(std::string(variant_name(x)));
  json specs;
  if (boolean_specs == quantitative_specs)
    specs = specs_json(boolean_specs);
  else
    specs = {{"boolean", specs_json(boolean_specs)}, {"quantitative", specs_json(quantitative_specs)}};
  return {{"schema_version", kSchemaVersion},
          {"environment", environment},
          {"variants", v},
          {"specs", specs},
          {"zeta", zeta},
          {"qlearning",
           {{"alpha", qlearning.alpha},
            {"gamma", qlearning.gamma},
            {"epsilon0", qlearning.epsilon0},
            {"epsilon_decay", qlearning.epsilon_decay},
            {"epsilon_min", qlearning.epsilon_min},
            {"max_steps", qlearning.max_steps}}},
          {"convergence",
           {{"span", ema.span},
            {"pairs", ema.pairs},
            {"tau_min", ema.tau_min},
            {"tau_max", ema.tau_max},
            {"scale_floor", ema.scale_floor}}},
          {"episodes", qlearning.episodes},
          {"runs", runs},
          {"seed", seed},
          {"workers", workers},
          {"final_window", final_window},
          {"out", out}};
}

void ExperimentConfig::validate() const {
  std::vector<std::string> problems;
  if (variants.empty()) problems.push_back("variants must name at least one variant");
  if (std::set<Variant>(variants.begin(), variants.end()).size() != variants.size())
    problems.push_back("variants must not repeat");
  if (runs == 0) problems.push_back("runs must be at least 1");
  if (workers == 0) problems.push_back("workers must be at least 1");
  if (final_window == 0) problems.push_back("final_window must be at least 1");
  if (zeta > 0) problems.push_back("zeta must not be positive");
  try {
    qlearning.validate();
  } catch (const std::exception& e) {
    problems.push_back(std::string("qlearning: ") + e.what());
  }
  try {
    EmaConvergence probe(ema);
  } catch (const std::exception& e) {
    problems.push_back(std::string("convergence: ") + e.what());
  }
  const auto& names = env_names();
  if (std::find(names.begin(), names.end(), environment) == names.end()) {
    std::string known;
    for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
    problems.push_back("environment '" + environment + "' is unknown (" + known + ")");
  } else {
    const auto env = make_env(environment, seed);
    const std::set<std::string> universe(env->atoms().begin(), env->atoms().end());
    auto check = [&](const std::optional<std::vector<SpecText>>& list, const char* which) {
      if (!list) return;
      for (std::size_t i = 0; i < list->size(); ++i) {
        try {
          parse((*list)[i].formula, universe);
        } catch (const ParseError& e) {
          problems.push_back(std::string("specs.") + which + "[" + std::to_string(i) + "]: column " +
                             std::to_string(e.column()) + ": " + e.what());
        }
      }
    };
    check(boolean_specs, "boolean");
    check(quantitative_specs, "quantitative");
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

std::vector<SpecRewardPair> ExperimentConfig::specs(const LabelledMdp& env, Mode mode) const {
  const auto& list = mode == Mode::Boolean ? boolean_specs : quantitative_specs;
  if (!list) return env.specs(mode);
  std::vector<SpecRewardPair> out;
  for (const auto& s : *list) out.emplace_back(s.formula, s.weight, mode);
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const Progress& progress) {
  cfg.validate();
  ExperimentResult res;
  res.config = cfg;
  res.runs.assign(cfg.variants.size(), std::vector<RunResult>(cfg.runs));

  // Bundles are immutable and shared by all runs of a variant.
  std::vector<std::shared_ptr<const CompositeMonitor>> bundles;
  {
    const auto env = make_env(cfg.environment, cfg.seed);
    for (auto v : cfg.variants) {
      if (v == Variant::Base) {
        bundles.push_back(nullptr);
        continue;
      }
      const Mode mode = v == Variant::Boolean ? Mode::Boolean : Mode::Quantitative;
      bundles.push_back(compose(cfg.specs(*env, mode), cfg.zeta, env->atoms(), mode));
    }
  }

  const std::size_t jobs = cfg.variants.size() * cfg.runs;
  std::atomic<std::size_t> next{0};
  std::mutex report;
  std::exception_ptr failure;
  auto worker = [&] {
    const auto env = make_env(cfg.environment, cfg.seed);
    for (std::size_t j; (j = next.fetch_add(1)) < jobs;) {
      const std::size_t vi = j % cfg.variants.size();
      const std::size_t run = j / cfg.variants.size();
      try {
        QLearnConfig q = cfg.qlearning;
        q.seed = cfg.seed + run;
        res.runs[vi][run] = train(*env, bundles[vi].get(), q, cfg.ema, cfg.variants[vi]);
        if (progress) {
          std::lock_guard lock(report);
          progress(cfg.variants[vi], run, res.runs[vi][run]);
        }
      } catch (...) {
        std::lock_guard lock(report);
        if (!failure) failure = std::current_exception();
        next = jobs;
      }
    }
  };
  const std::size_t n = std::min(cfg.workers, jobs);
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  res.summary = summarize(run_rows(res));
  return res;
}

std::vector<RunRow> run_rows(const ExperimentResult& r) {
  std::vector<RunRow> rows;
  for (std::size_t v = 0; v < r.runs.size(); ++v)
    for (const auto& run : r.runs[v])
      rows.push_back({r.config.variants[v], run.seed, run.converged_episode, run.converged_seconds,
                      run.final_completion(r.config.final_window), run.product_tuples});
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<RunRow>& rows) {
  std::vector<SummaryRow> out;
  std::map<Variant, std::size_t> index;
  std::vector<std::vector<const RunRow*>> groups;
  for (const auto& row : rows) {
    auto [it, fresh] = index.emplace(row.variant, out.size());
    if (fresh) {
      out.push_back({});
      out.back().variant = row.variant;
      groups.emplace_back();
    }
    groups[it->second].push_back(&row);
  }
  double best = 0.0;
  for (std::size_t g = 0; g < out.size(); ++g) {
    SummaryRow& s = out[g];
    s.runs = groups[g].size();
    double ep = 0.0, sec = 0.0, sum = 0.0;
    for (const auto* r : groups[g]) {
      sum += r->final_completion;
      if (r->converged_episode) {
        ++s.converged_runs;
        ep += static_cast<double>(*r->converged_episode);
        sec += r->converged_seconds.value_or(0.0);
      }
    }
    if (s.converged_runs) {
      s.mean_episode = ep / static_cast<double>(s.converged_runs);
      s.mean_seconds = sec / static_cast<double>(s.converged_runs);
    }
    s.completion_mean = sum / static_cast<double>(s.runs);
    if (s.runs > 1) {
      double var = 0.0;
      for (const auto* r : groups[g]) var += (r->final_completion - s.completion_mean) * (r->final_completion - s.completion_mean);
      var /= static_cast<double>(s.runs - 1);
      s.completion_ci95 = 1.96 * std::sqrt(var / static_cast<double>(s.runs));
    }
    best = g == 0 ? s.completion_mean : std::max(best, s.completion_mean);
  }
  for (auto& s : out) s.suboptimal = s.completion_mean < best - 0.02;
  return out;
}

void write_run_csv(std::ostream& os, const RunResult& r) {
  os << "episode,return,task_completion,epsilon,steps\n";
  for (std::size_t e = 0; e < r.episodes.size(); ++e) {
    const auto& x = r.episodes[e];
    os << e + 1 << ',' << num(x.ret) << ',' << num(x.completion) << ',' << num(x.epsilon) << ',' << x.steps << '\n';
  }
}

void write_runs_csv(std::ostream& os, const std::vector<RunRow>& rows) {
  os << "variant,seed,converged_episode,converged_seconds,final_completion,product_tuples\n";
  for (const auto& r : rows) {
    os << variant_name(r.variant) << ',' << r.seed << ','
       << (r.converged_episode ? std::to_string(*r.converged_episode) : "None") << ','
       << (r.converged_seconds ? num(*r.converged_seconds, 6) : "None") << ',' << num(r.final_completion, 17) << ','
       << r.product_tuples << '\n';
  }
}

void write_summary_csv(std::ostream& os, const std::string& environment, const std::vector<SummaryRow>& rows) {
  os << "environment,variant,runs,converged_runs,mean_convergence_episode,mean_convergence_seconds,"
        "completion_mean,completion_ci95,suboptimal\n";
  for (const auto& s : rows) {
    os << environment << ',' << variant_name(s.variant) << ',' << s.runs << ',' << s.converged_runs << ','
       << (s.mean_episode ? num(*s.mean_episode, 6) : "None") << ','
       << (s.mean_seconds ? num(*s.mean_seconds, 6) : "None") << ',' << num(s.completion_mean, 6) << ','
       << num(s.completion_ci95, 6) << ',' << (s.suboptimal ? "true" : "false") << '\n';
  }
}

std::vector<RunRow> read_runs_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("variant,seed,", 0) != 0)
    throw std::runtime_error("runs.csv: unexpected header");
  std::vector<RunRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 6) throw std::runtime_error("runs.csv: expected 6 fields in '" + line + "'");
    RunRow r{parse_variant(f[0]), std::stoull(f[1]), std::nullopt, std::nullopt, std::stod(f[4]), std::stoull(f[5])};
    if (f[2] != "None") r.converged_episode = std::stoull(f[2]);
    if (f[3] != "None") r.converged_seconds = std::stod(f[3]);
    rows.push_back(r);
  }
  return rows;
}

std::vector<double> moving_average(const std::vector<double>& xs, std::size_t window) {
  std::vector<double> out;
  out.reserve(xs.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sum += xs[i];
    if (i >= window) sum -= xs[i - window];
    out.push_back(sum / static_cast<double>(std::min(i + 1, window)));
  }
  return out;
}

std::string completion_svg(const ExperimentResult& r, std::size_t window) {
  constexpr double W = 640, H = 400, L = 56, R = 150, T = 30, B = 44;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c"};
  const double pw = W - L - R, ph = H - T - B;
  const std::size_t episodes = r.config.qlearning.episodes;
  auto fx = [&](double e) { return num(L + (episodes > 1 ? e / static_cast<double>(episodes - 1) : 0.0) * pw, 6); };
  auto fy = [&](double v) { return num(T + (1.0 - v) * ph, 6); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << L << "\" y=\"18\">" << r.config.environment << ": task completion (moving average, window "
     << window << ")</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = k / 4.0;
    os << "<line x1=\"" << L << "\" x2=\"" << L + pw << "\" y1=\"" << fy(v) << "\" y2=\"" << fy(v)
       << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << fy(v) << "\" text-anchor=\"end\" dy=\"4\">" << num(v, 3)
       << "</text>\n";
  }
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << L << "\" y=\"" << H - 12 << "\">1</text>\n";
  os << "<text x=\"" << L + pw << "\" y=\"" << H - 12 << "\" text-anchor=\"end\">" << episodes << "</text>\n";
  os << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">episode</text>\n";

  for (std::size_t v = 0; v < r.runs.size(); ++v) {
    std::vector<double> mean(episodes, 0.0);
    for (const auto& run : r.runs[v])
      for (std::size_t e = 0; e < run.episodes.size() && e < episodes; ++e) mean[e] += run.episodes[e].completion;
    for (auto& m : mean) m /= static_cast<double>(std::max<std::size_t>(1, r.runs[v].size()));
    const auto smooth = moving_average(mean, window);
    const char* color = kColors[v % 3];
    if (!smooth.empty()) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t e = 0; e < smooth.size(); ++e) os << (e ? " " : "") << fx(e) << ',' << fy(smooth[e]);
      os << "\"/>\n";
    }
    const double ly = T + 16 + 18.0 * v;
    os << "<line x1=\"" << L + pw + 12 << "\" x2=\"" << L + pw + 36 << "\" y1=\"" << ly << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << L + pw + 42 << "\" y=\"" << ly + 4 << "\">" << variant_name(r.config.variants[v])
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_outputs(const ExperimentResult& r, const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  fs::create_directories(root / "runs");
  auto open = [](const fs::path& p) {
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    return f;
  };
  open(root / "config.json") << r.config.to_json().dump(2) << '\n';
  for (std::size_t v = 0; v < r.runs.size(); ++v)
    for (std::size_t k = 0; k < r.runs[v].size(); ++k) {
      char name[64];
      std::snprintf(name, sizeof name, "%s_%03zu.csv", std::string(variant_name(r.config.variants[v])).c_str(), k);
      auto f = open(root / "runs" / name);
      write_run_csv(f, r.runs[v][k]);
    }
  {
    auto f = open(root / "runs.csv");
    write_runs_csv(f, run_rows(r));
  }
  {
    auto f = open(root / "summary.csv");
    write_summary_csv(f, r.config.environment, r.summary);
  }
  open(root / "completion.svg") << completion_svg(r);
}

}  // namespace qmon
