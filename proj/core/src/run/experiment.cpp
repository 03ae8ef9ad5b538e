#include "vmac/run/experiment.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "vmac/diff/checkpoint.hpp"
#include "vmac/envs/factory.hpp"
#include "vmac/run/svg.hpp"
#include "vmac/verify/report.hpp"

namespace vmac::run {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// shortest round-trip formatting, identical across runs
std::string fmt(double v) { return json(v).dump(); }

[[noreturn]] void config_error(const std::string& field, const std::string& why) {
  throw std::invalid_argument("config field '" + field + "': " + why);
}

template <typename T>
T get_field(const json& j, const std::string& field) {
  if (!j.contains(field)) config_error(field, "missing");
  try {
    return j.at(field).get<T>();
  } catch (const json::exception& e) {
    config_error(field, e.what());
  }
}

std::string sanitize(const json& v) {
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
  }
  return s;
}

}  // namespace

json ExperimentConfig::to_json() const {
  json j{{"env", env},
         {"algo", algo.to_json()},
         {"seeds", seeds},
         {"total_steps", total_steps},
         {"eval_interval", eval_interval},
         {"eval_episodes", eval_episodes},
         {"out_dir", out_dir},
         {"workers", workers}};
  if (sweep) j["sweep"] = json{{"path", sweep->path}, {"values", sweep->values}};
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  for (const auto& [key, _] : j.items()) {
    static const char* known[] = {"env",       "algo",          "seeds",
                                  "total_steps", "eval_interval", "eval_episodes",
                                  "out_dir",   "workers",       "sweep"};
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) config_error(key, "unknown key");
  }
  ExperimentConfig c;
  c.env = get_field<json>(j, "env");
  if (!c.env.contains("name")) config_error("env.name", "missing");

  json algo_json = j.value("algo", json::object());
  // task defaults when the config leaves them out
  const std::string env_name = c.env["name"].get<std::string>();
  const int n_agents = c.env.value("n_agents", c.env.value("n_predators", 3));
  const std::string algo_name = algo_json.value("algorithm", "vm3ac");
  if (!algo_json.contains("beta")) {
    algo_json["beta"] = (algo_name == "maac" || algo_name == "maddpg")
                            ? 0.0
                            : marl::default_beta(env_name, n_agents);
  }
  if (!algo_json.contains("latent_dim")) {
    algo_json["latent_dim"] =
        algo_name == "vm3ac" ? marl::default_latent_dim(env_name, n_agents) : 0;
  }
  try {
    c.algo = marl::AlgoConfig::from_json(algo_json).normalized();
    c.algo.validate();
  } catch (const std::invalid_argument& e) {
    config_error("algo", e.what());
  }

  c.seeds = get_field<std::vector<std::uint64_t>>(j, "seeds");
  if (c.seeds.empty()) config_error("seeds", "must list at least one seed");
  c.total_steps = get_field<std::int64_t>(j, "total_steps");
  if (c.total_steps < 0) config_error("total_steps", "must be >= 0");
  c.eval_interval = j.value("eval_interval", c.eval_interval);
  if (c.eval_interval <= 0) config_error("eval_interval", "must be positive");
  c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
  if (c.eval_episodes <= 0) config_error("eval_episodes", "must be positive");
  c.out_dir = j.value("out_dir", c.out_dir);
  c.workers = j.value("workers", c.workers);
  if (c.workers < 1) config_error("workers", "must be >= 1");

  if (j.contains("sweep")) {
    SweepSpec sw;
    sw.path = get_field<std::string>(j["sweep"], "path");
    sw.values = get_field<std::vector<json>>(j["sweep"], "values");
    if (sw.values.empty()) config_error("sweep.values", "must be non-empty");
    c.sweep = std::move(sw);
  }

  // make sure the environment config itself is well formed
  try {
    (void)envs::make_env(c.env);
  } catch (const std::exception& e) {
    config_error("env", e.what());
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument("config parse error in " + path + ": " + e.what());
  }
  return from_json(j);
}

namespace {

struct SeedRun {
  SeedOutcome outcome;
  std::optional<json> abort_diag;
};

SeedRun run_one_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedRun run;
  run.outcome.seed = seed;
  marl::LearnerState state(cfg.algo, envs::make_env(cfg.env), seed);

  const fs::path metrics_path = fs::path(cfg.out_dir) / ("metrics_seed" + std::to_string(seed) + ".jsonl");
  std::ofstream metrics_file(metrics_path);
  if (!metrics_file) {
    throw std::runtime_error("cannot open metrics file: " + metrics_path.string());
  }
  metrics_file << json{{"header", "vmac-metrics-v1"},
                       {"seed", seed},
                       {"algorithm", marl::to_string(cfg.algo.algorithm)},
                       {"env", cfg.env["name"]}}
               << "\n";

  marl::TrainOptions opt;
  opt.total_steps = cfg.total_steps;
  opt.eval_interval = cfg.eval_interval;
  opt.eval_episodes = cfg.eval_episodes;
  opt.on_metric = [&](const marl::MetricRecord& rec) { metrics_file << rec.to_json() << "\n"; };

  try {
    marl::TrainResult tr = marl::train(state, opt);
    run.outcome.metrics = std::move(tr.metrics);
    run.outcome.audit = tr.audit;
    run.outcome.eval_audit = tr.eval_audit;
  } catch (const marl::TrainAbort& abort) {
    run.abort_diag = abort.diagnostics;
    run.abort_diag.value()["what"] = abort.what();
    return run;
  }
  if (!run.outcome.metrics.empty()) {
    run.outcome.initial_return = run.outcome.metrics.front().mean_return;
    run.outcome.final_return = run.outcome.metrics.back().mean_return;
  }

  json meta = state.checkpoint_meta();
  meta["env_config"] = cfg.env;
  meta["seed"] = seed;
  diff::save_checkpoint((fs::path(cfg.out_dir) / ("checkpoint_seed" + std::to_string(seed) + ".json")).string(),
                        state.named_params(), meta);
  return run;
}

void write_aggregate_csv(const ExperimentConfig& cfg, const std::vector<SeedOutcome>& seeds) {
  const fs::path path = fs::path(cfg.out_dir) / "aggregate.csv";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open aggregate file: " + path.string());
  out << "step,mean,std\n";
  if (seeds.empty() || seeds.front().metrics.empty()) return;
  const std::size_t points = seeds.front().metrics.size();
  for (std::size_t k = 0; k < points; ++k) {
    double mean = 0.0;
    int n = 0;
    for (const auto& s : seeds) {
      if (k < s.metrics.size()) {
        mean += s.metrics[k].mean_return;
        ++n;
      }
    }
    mean /= n;
    double var = 0.0;
    for (const auto& s : seeds) {
      if (k < s.metrics.size()) {
        var += (s.metrics[k].mean_return - mean) * (s.metrics[k].mean_return - mean);
      }
    }
    var /= n;
    out << seeds.front().metrics[k].step << "," << fmt(mean) << "," << fmt(std::sqrt(var))
        << "\n";
  }
}

void write_curves_svg(const ExperimentConfig& cfg, const std::vector<SeedOutcome>& seeds) {
  static const char* colors[] = {"#c0392b", "#2980b9", "#27ae60", "#8e44ad",
                                 "#d35400", "#16a085", "#2c3e50"};
  std::vector<Series> series;
  Series mean_series{"mean over seeds", "#000000", {}};
  if (!seeds.empty()) {
    const std::size_t points = seeds.front().metrics.size();
    for (std::size_t k = 0; k < points; ++k) {
      double m = 0.0;
      int n = 0;
      for (const auto& s : seeds) {
        if (k < s.metrics.size()) {
          m += s.metrics[k].mean_return;
          ++n;
        }
      }
      if (n > 0) {
        mean_series.xy.emplace_back(static_cast<double>(seeds.front().metrics[k].step), m / n);
      }
    }
  }
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    Series s{"seed " + std::to_string(seeds[i].seed), colors[i % 7], {}};
    for (const auto& rec : seeds[i].metrics) {
      s.xy.emplace_back(static_cast<double>(rec.step), rec.mean_return);
    }
    series.push_back(std::move(s));
  }
  series.push_back(std::move(mean_series));
  write_line_chart((fs::path(cfg.out_dir) / "curves.svg").string(),
                   marl::to_string(cfg.algo.algorithm) + " on " +
                       cfg.env["name"].get<std::string>(),
                   "environment steps", "mean eval return", series);
}

}  // namespace

RunSummary run_training(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  {
    std::ofstream cfg_out(fs::path(cfg.out_dir) / "config.json");
    cfg_out << cfg.to_json().dump(2) << "\n";
  }

  std::vector<SeedRun> runs(cfg.seeds.size());
  std::vector<std::exception_ptr> errors(cfg.seeds.size());
  std::atomic<std::size_t> next{0};
  const int n_workers = std::min<int>(cfg.workers, static_cast<int>(cfg.seeds.size()));

  auto worker = [&]() {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= cfg.seeds.size()) return;
      try {
        runs[k] = run_one_seed(cfg, cfg.seeds[k]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < n_workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  for (std::size_t k = 0; k < runs.size(); ++k) {
    if (errors[k]) std::rethrow_exception(errors[k]);
    if (runs[k].abort_diag) {
      const fs::path p =
          fs::path(cfg.out_dir) / ("abort_seed" + std::to_string(cfg.seeds[k]) + ".json");
      std::ofstream out(p);
      out << runs[k].abort_diag->dump(2) << "\n";
      throw marl::TrainAbort("seed " + std::to_string(cfg.seeds[k]) +
                                 " aborted; diagnostics in " + p.string(),
                             *runs[k].abort_diag);
    }
  }

  RunSummary summary;
  summary.out_dir = cfg.out_dir;
  for (auto& r : runs) summary.seeds.push_back(std::move(r.outcome));
  write_aggregate_csv(cfg, summary.seeds);
  write_curves_svg(cfg, summary.seeds);

  double mean = 0.0;
  for (const auto& s : summary.seeds) mean += s.final_return;
  mean /= summary.seeds.empty() ? 1 : static_cast<double>(summary.seeds.size());
  double var = 0.0;
  for (const auto& s : summary.seeds) var += (s.final_return - mean) * (s.final_return - mean);
  var /= summary.seeds.empty() ? 1 : static_cast<double>(summary.seeds.size());
  summary.final_mean = mean;
  summary.final_std = std::sqrt(var);
  return summary;
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed_override,
              std::optional<std::string> out_override) {
  ExperimentConfig cfg;
  try {
    cfg = ExperimentConfig::load(config_path);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  if (seed_override) cfg.seeds = {*seed_override};
  if (out_override) cfg.out_dir = *out_override;

  try {
    const RunSummary summary = run_training(cfg);
    std::cout << "algorithm " << marl::to_string(cfg.algo.algorithm) << " on "
              << cfg.env["name"].get<std::string>() << ", " << summary.seeds.size()
              << " seed(s), " << cfg.total_steps << " steps each\n";
    std::cout << "  seed   initial_return   final_return\n";
    for (const auto& s : summary.seeds) {
      std::cout << "  " << s.seed << "   " << fmt(s.initial_return) << "   "
                << fmt(s.final_return) << "\n";
    }
    std::cout << "final mean return " << fmt(summary.final_mean) << " +/- "
              << fmt(summary.final_std) << "\n";
    std::cout << "outputs in " << summary.out_dir << "\n";
    return 0;
  } catch (const marl::TrainAbort& e) {
    std::cerr << "training aborted: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_eval(const std::string& checkpoint_path, int episodes, const std::string& mode,
             std::uint64_t seed, std::optional<std::string> dump_path) {
  try {
    const marl::ExecLatentMode exec_mode = marl::exec_mode_from_string(mode);
    const json ckpt = diff::load_checkpoint_json(checkpoint_path);
    const json& meta = ckpt.at("meta");
    auto env = envs::make_env(meta.at("env_config"));
    const marl::AlgoConfig algo = marl::AlgoConfig::from_json(meta.at("algo_config"));
    marl::LearnerState state(algo, env->clone(), 0);
    diff::load_checkpoint_params(ckpt, state.named_params());

    std::vector<nets::GaussianPolicy> policies;
    for (const auto& a : state.agents) policies.push_back(a.policy);
    const bool deterministic = algo.algorithm == marl::Algorithm::maddpg;
    const marl::EvalResult res =
        marl::evaluate_policies(policies, *env, exec_mode, episodes, seed, deterministic);

    std::cout << "mean_return " << fmt(res.mean_return) << " +/- " << fmt(res.std_return)
              << " over " << episodes << " episodes (mode " << mode << ")\n";
    std::cout << "decentralization audit: own_reads=" << res.audit.own_reads
              << " cross_reads=" << res.audit.cross_reads
              << " z_mismatches=" << res.audit.z_mismatches << "\n";

    if (dump_path) {
      std::ofstream dump(*dump_path);
      if (!dump) throw std::runtime_error("cannot open dump file: " + *dump_path);
      auto env2 = env->clone();
      marl::ExecSession session(policies, exec_mode, derive_seed(seed, 0xD0), deterministic);
      auto obs = env2->reset(derive_seed(seed, 0xD1));
      int t = 0;
      while (true) {
        const auto actions = session.act(obs);
        const auto sr = env2->step(actions);
        dump << json{{"t", t},
                     {"obs", obs},
                     {"actions", actions},
                     {"reward", sr.reward},
                     {"done", sr.done()}}
             << "\n";
        obs = sr.obs;
        ++t;
        if (sr.done()) break;
      }
    }
    return res.audit.cross_reads == 0 ? 0 : 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_verify(std::optional<std::string> report_path) {
  verify::VerifyOptions opt;
  const verify::VerifyReport rep = verify::run_verification(opt);
  auto line = [&](const char* name, const json& section) {
    std::cout << (section["pass"].get<bool>() ? "[PASS] " : "[FAIL] ") << name << "  "
              << section.dump() << "\n";
  };
  line("mi-bounds", rep.data["mi_bounds"]);
  line("policy-evaluation", rep.data["policy_evaluation"]);
  line("policy-improvement", rep.data["policy_improvement"]);
  line("gradients", rep.data["gradients"]);
  line("negative-control", rep.data["negative_control"]);
  if (report_path) {
    std::ofstream out(*report_path);
    if (!out) {
      std::cerr << "error: cannot write report to " << *report_path << "\n";
      return 1;
    }
    out << rep.data.dump(2) << "\n";
  }
  std::cout << (rep.pass ? "verification PASSED" : "verification FAILED") << "\n";
  return rep.pass ? 0 : 1;
}

int cmd_sweep(const std::string& config_path, std::optional<std::string> out_override) {
  ExperimentConfig base;
  try {
    base = ExperimentConfig::load(config_path);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  if (!base.sweep) {
    std::cerr << "error: config has no sweep block\n";
    return 2;
  }
  if (out_override) base.out_dir = *out_override;

  json base_json = base.to_json();
  base_json.erase("sweep");
  const SweepSpec sweep = *base.sweep;
  const std::string root = base.out_dir;

  // resolve the dotted path
  std::vector<std::string> keys;
  std::stringstream ss(sweep.path);
  std::string part;
  while (std::getline(ss, part, '.')) keys.push_back(part);
  if (keys.empty()) {
    std::cerr << "error: empty sweep path\n";
    return 2;
  }

  for (const json& value : sweep.values) {
    json cfg_json = base_json;
    json* cursor = &cfg_json;
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) cursor = &((*cursor)[keys[i]]);
    (*cursor)[keys.back()] = value;
    cfg_json["out_dir"] = root + "/" + keys.back() + "_" + sanitize(value);

    try {
      const ExperimentConfig cfg = ExperimentConfig::from_json(cfg_json);
      std::cout << "sweep " << sweep.path << " = " << value.dump() << " -> " << cfg.out_dir
                << "\n";
      const RunSummary summary = run_training(cfg);
      std::cout << "  final mean return " << fmt(summary.final_mean) << " +/- "
                << fmt(summary.final_std) << "\n";
    } catch (const std::exception& e) {
      std::cerr << "error in sweep value " << value.dump() << ": " << e.what() << "\n";
      return 1;
    }
  }
  return 0;
}

}  // namespace vmac::run
