#pragma once

#include <functional>
#include <optional>

#include <json.hpp>

#include "vmac/marl/exec.hpp"
#include "vmac/marl/learner.hpp"

namespace vmac::marl {

struct MetricRecord {
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
  double value_loss = 0.0;
  double critic_loss = 0.0;
  double policy_loss = 0.0;
  double entropy = 0.0;
  double mi_proxy = 0.0;  // mean predictor log-density on fresh samples
  std::int64_t updates = 0;

  nlohmann::json to_json() const;
};

struct TrainOptions {
  std::int64_t total_steps = 0;
  std::int64_t eval_interval = 5000;
  int eval_episodes = 10;
  std::function<void(const MetricRecord&)> on_metric;  // optional sink
};

struct TrainResult {
  std::vector<MetricRecord> metrics;
  LatentAudit audit;
  ExecAudit eval_audit;
  std::int64_t env_steps = 0;
  std::int64_t updates = 0;
};

// Raised when a loss turns non-finite; carries a diagnostic payload.
struct TrainAbort : std::runtime_error {
  explicit TrainAbort(const std::string& msg, nlohmann::json diag)
      : std::runtime_error(msg), diagnostics(std::move(diag)) {}
  nlohmann::json diagnostics;
};

// The training loop: episodes of environment interaction with one latent
// draw per step, a gradient pass every `update_every` steps once past the
// warmup, and periodic decentralized evaluation (including one at step 0).
TrainResult train(LearnerState& state, const TrainOptions& options);

}  // namespace vmac::marl
