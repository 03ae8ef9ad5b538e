#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "vmac/diff/adam.hpp"
#include "vmac/diff/checkpoint.hpp"
#include "vmac/envs/markov_game.hpp"
#include "vmac/marl/config.hpp"
#include "vmac/marl/replay_buffer.hpp"
#include "vmac/nets/critic.hpp"
#include "vmac/nets/policy.hpp"
#include "vmac/nets/predictor.hpp"
#include "vmac/rng.hpp"

namespace vmac::marl {

// One agent's parameter bundle and optimizer states. Targets for the
// deterministic-policy baseline are only populated when that algorithm runs.
struct AgentLearner {
  nets::GaussianPolicy policy;
  nets::CriticSet critics;
  nets::VariationalPredictor predictor;
  nets::GaussianPolicy policy_target;  // maddpg
  nets::Mlp q1_target;                 // maddpg
  diff::AdamState opt_policy, opt_q1, opt_q2, opt_v, opt_pred;
};

// Counters proving the one-shared-latent contract: exactly one z per
// environment step and per update sample, consumed identically by every
// agent. Violations mean the same step/sample saw different latent payloads.
struct LatentAudit {
  std::int64_t env_steps = 0;
  std::int64_t env_draws = 0;
  std::int64_t update_samples = 0;
  std::int64_t update_draws = 0;
  std::int64_t share_checks = 0;
  std::int64_t share_violations = 0;
};

// Everything one training run owns: per-agent networks, environment handle,
// replay buffer and four named random streams (environment seeding, latent
// draws, exploration noise, minibatch sampling) that never interleave.
struct LearnerState {
  AlgoConfig cfg;
  std::unique_ptr<envs::MarkovGameEnv> env;
  std::uint64_t master_seed = 0;

  int n_agents = 0;
  std::vector<int> obs_dims, act_dims;
  int obs_total = 0, act_total = 0;

  std::vector<AgentLearner> agents;
  ReplayBuffer buffer;
  Rng rng_env, rng_latent, rng_explore, rng_sampler;

  std::int64_t env_steps = 0;
  std::int64_t updates = 0;
  std::int64_t planned_steps = 0;  // exploration-noise annealing span
  LatentAudit audit;

  LearnerState(const AlgoConfig& cfg, std::unique_ptr<envs::MarkovGameEnv> env,
               std::uint64_t seed);
  LearnerState(const LearnerState& other);
  LearnerState& operator=(const LearnerState&) = delete;

  int critic_x_dim(int agent) const;
  int critic_a_dim(int agent) const;
  diff::NamedParams named_params();
  nlohmann::json checkpoint_meta() const;
};

// Frozen stochasticity for one update pass: one shared latent row per sample
// plus per-agent reparameterization noise.
struct BatchNoise {
  int batch = 0;
  int latent_dim = 0;
  std::vector<double> z;                        // [batch * latent_dim]
  std::vector<std::vector<double>> eps;         // per agent: [batch * act_dim]
};

struct Batch {
  std::vector<Transition> items;
};

Batch make_batch(const ReplayBuffer& buffer, const std::vector<std::size_t>& indices);
BatchNoise draw_batch_noise(LearnerState& state, int batch);

// Fresh joint actions sampled from the current policies under the shared
// per-sample latent: the reusable ingredient of the value targets and the
// policy objective. The reverse prediction factor consumes the own action
// from here as a constant, which is what blocks its gradient path.
struct FreshActions {
  std::vector<std::vector<double>> actions;    // per agent [B, act]
  std::vector<std::vector<double>> log_probs;  // per agent [B]
  std::vector<double> joint;                   // [B, act_total]
};

FreshActions sample_fresh_actions(const LearnerState& state, const Batch& batch,
                                  const BatchNoise& noise);

// Actions for one training step: a single fresh z shared by every agent, then
// one policy sample per agent (or deterministic action plus exploration noise
// for the deterministic baseline).
envs::JointAction act_train(LearnerState& state, const envs::JointObs& obs);

// Per-sample regression targets for the state-value network of `agent`:
// fresh joint actions from the current policies under the shared z, then
//   Qmin - beta log pi_i + (beta/N) * sum_j [log q(a_i|a_j,..) + log q(a_j|a_i,..)]
std::vector<double> value_targets(const LearnerState& state, const Batch& batch,
                                  const BatchNoise& noise, int agent);

struct LossBreakdown {
  double value_loss = 0.0;   // state-value regression
  double critic_loss = 0.0;  // both action-value critics (or the single one)
  double policy_loss = 0.0;  // reparameterized policy (+ predictor) objective
  double entropy = 0.0;      // mean of -log pi over fresh samples
  double var_log_prob = 0.0; // mean predictor log-density, 0 when disabled
};

enum GradMask : unsigned {
  kGradNone = 0,
  kGradValue = 1,
  kGradCritic = 2,
  kGradPolicy = 4,
  kGradAll = 7,
};

// Evaluates the three losses on a fixed batch and noise without touching any
// parameter. Bits of `grad_mask` select which losses run backward so their
// gradients land in the parameters (caller clears them). A caller-provided
// `fresh` pins the sampled joint actions (finite-difference checks hold it
// fixed while wiggling parameters); by default it is drawn from the current
// policies.
LossBreakdown compute_losses(LearnerState& state, const Batch& batch, const BatchNoise& noise,
                             int agent, unsigned grad_mask = kGradNone,
                             const FreshActions* fresh = nullptr);

struct UpdateMetrics {
  LossBreakdown mean;  // averaged over agents
  std::int64_t updates = 0;
};

// One full gradient pass: per agent a step on the state-value and twin
// critics, then on the policy and predictor, then the target-network moving
// average. Returns nothing when the buffer cannot fill a batch yet.
std::optional<UpdateMetrics> update(LearnerState& state);

}  // namespace vmac::marl
