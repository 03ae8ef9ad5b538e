#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vmac/marl/config.hpp"
#include "vmac/marl/learner.hpp"
#include "vmac/nets/policy.hpp"

namespace vmac::marl {

// Runtime evidence that execution stayed decentralized: each actor counts
// observation reads by owner tag and the session cross-checks the per-step
// latent vectors all actors generated locally.
struct ExecAudit {
  std::int64_t own_reads = 0;
  std::int64_t cross_reads = 0;
  std::int64_t steps = 0;
  std::int64_t z_mismatches = 0;
};

// One agent at execution time: a policy snapshot plus local random streams.
// In seeded mode every actor owns an identically seeded Gaussian stream, so
// they regenerate the same per-step latent without communicating; in zero
// mode the latent is the zero vector. Action noise is always local.
class DecentralizedActor {
 public:
  // `deterministic` actors emit tanh(mu) and skip action noise entirely (the
  // deterministic-policy baseline); stochastic actors sample from the policy.
  DecentralizedActor(int agent_index, nets::GaussianPolicy policy_snapshot, ExecLatentMode mode,
                     std::uint64_t shared_latent_seed, bool deterministic = false);

  // `owner_tag` names whose observation this is; anything but our own index
  // counts as a cross-agent read in the audit.
  std::vector<double> act(int owner_tag, std::span<const double> obs, ExecAudit& audit);

  const std::vector<double>& last_z() const { return z_; }
  int agent_index() const { return agent_; }

 private:
  int agent_;
  nets::GaussianPolicy policy_;
  ExecLatentMode mode_;
  bool deterministic_ = false;
  Rng z_stream_;
  Rng eps_stream_;
  std::vector<double> z_, eps_;
};

// Drives one decentralized episode's action selection across all agents.
class ExecSession {
 public:
  ExecSession(const std::vector<nets::GaussianPolicy>& policies, ExecLatentMode mode,
              std::uint64_t shared_latent_seed, bool deterministic = false);
  ExecSession(const LearnerState& state, ExecLatentMode mode, std::uint64_t shared_latent_seed);

  envs::JointAction act(const envs::JointObs& obs);

  const ExecAudit& audit() const { return audit_; }
  int n_agents() const { return static_cast<int>(actors_.size()); }

 private:
  std::vector<DecentralizedActor> actors_;
  ExecAudit audit_;
};

// Mean/stddev of episode returns over decentralized rollouts.
struct EvalResult {
  double mean_return = 0.0;
  double std_return = 0.0;
  int episodes = 0;
  ExecAudit audit;
};

EvalResult evaluate_policies(const std::vector<nets::GaussianPolicy>& policies,
                             const envs::MarkovGameEnv& env_proto, ExecLatentMode mode,
                             int episodes, std::uint64_t seed, bool deterministic = false);

}  // namespace vmac::marl
