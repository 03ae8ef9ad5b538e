#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vmac/marl/config.hpp"
#include "vmac/marl/trainer.hpp"

namespace vmac::run {

struct SweepSpec {
  std::string path;  // dotted key into the config, e.g. "algo.beta"
  std::vector<nlohmann::json> values;
};

// Everything one experiment needs. A persisted config re-runs to bit-identical
// metric files.
struct ExperimentConfig {
  nlohmann::json env;  // environment factory config, {"name": ..., ...}
  marl::AlgoConfig algo;
  std::vector<std::uint64_t> seeds = {1};
  std::int64_t total_steps = 0;
  std::int64_t eval_interval = 5000;
  int eval_episodes = 10;
  std::string out_dir = "runs/out";
  int workers = 1;  // parallel seed workers
  std::optional<SweepSpec> sweep;

  nlohmann::json to_json() const;
  // Throws std::invalid_argument naming the offending field. Beta and
  // latent-dimension defaults are filled per environment when absent.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  double initial_return = 0.0;
  double final_return = 0.0;
  std::vector<marl::MetricRecord> metrics;
  marl::LatentAudit audit;
  marl::ExecAudit eval_audit;
};

struct RunSummary {
  std::string out_dir;
  std::vector<SeedOutcome> seeds;
  double final_mean = 0.0;
  double final_std = 0.0;
};

// Trains every seed (possibly on worker threads), writing per-seed JSON-lines
// metrics and checkpoints, an aggregate CSV (step, mean, std) and an SVG
// learning curve into the output directory.
RunSummary run_training(const ExperimentConfig& config);

// CLI entry points; return a process exit status.
int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed_override,
              std::optional<std::string> out_override);
int cmd_eval(const std::string& checkpoint_path, int episodes, const std::string& mode,
             std::uint64_t seed, std::optional<std::string> dump_path);
int cmd_verify(std::optional<std::string> report_path);
int cmd_sweep(const std::string& config_path, std::optional<std::string> out_override);

}  // namespace vmac::run
