#include "vmac/marl/exec.hpp"

#include <cmath>
#include <stdexcept>

namespace vmac::marl {

DecentralizedActor::DecentralizedActor(int agent_index, nets::GaussianPolicy policy_snapshot,
                                       ExecLatentMode mode, std::uint64_t shared_latent_seed,
                                       bool deterministic)
    : agent_(agent_index),
      policy_(std::move(policy_snapshot)),
      mode_(mode),
      deterministic_(deterministic),
      z_stream_(shared_latent_seed),
      eps_stream_(derive_seed(shared_latent_seed, 0x9000 + static_cast<std::uint64_t>(agent_index))),
      z_(static_cast<std::size_t>(policy_.latent_dim()), 0.0),
      eps_(static_cast<std::size_t>(policy_.act_dim()), 0.0) {}

std::vector<double> DecentralizedActor::act(int owner_tag, std::span<const double> obs,
                                            ExecAudit& audit) {
  if (owner_tag == agent_) {
    audit.own_reads += 1;
  } else {
    audit.cross_reads += 1;
  }
  if (mode_ == ExecLatentMode::seeded) {
    z_stream_.fill_normal(z_);
  } else {
    std::fill(z_.begin(), z_.end(), 0.0);
  }
  if (deterministic_) {
    return policy_.mean_action_raw(obs, z_);
  }
  eps_stream_.fill_normal(eps_);
  auto s = policy_.sample_raw(obs, z_, eps_);
  return std::move(s.action);
}

ExecSession::ExecSession(const std::vector<nets::GaussianPolicy>& policies, ExecLatentMode mode,
                         std::uint64_t shared_latent_seed, bool deterministic) {
  actors_.reserve(policies.size());
  for (std::size_t i = 0; i < policies.size(); ++i) {
    actors_.emplace_back(static_cast<int>(i), policies[i], mode, shared_latent_seed,
                         deterministic);
  }
}

ExecSession::ExecSession(const LearnerState& state, ExecLatentMode mode,
                         std::uint64_t shared_latent_seed) {
  const bool det = state.cfg.algorithm == Algorithm::maddpg;
  actors_.reserve(static_cast<std::size_t>(state.n_agents));
  for (int i = 0; i < state.n_agents; ++i) {
    actors_.emplace_back(i, state.agents[static_cast<std::size_t>(i)].policy, mode,
                         shared_latent_seed, det);
  }
}

envs::JointAction ExecSession::act(const envs::JointObs& obs) {
  if (obs.size() != actors_.size()) {
    throw std::invalid_argument("ExecSession::act: observation count mismatch");
  }
  envs::JointAction joint(actors_.size());
  audit_.steps += 1;
  for (std::size_t i = 0; i < actors_.size(); ++i) {
    joint[i] = actors_[i].act(static_cast<int>(i), obs[i], audit_);
  }
  // all locally generated latents must agree
  const auto& ref = actors_.front().last_z();
  for (std::size_t i = 1; i < actors_.size(); ++i) {
    const auto& zi = actors_[i].last_z();
    if (zi != ref) audit_.z_mismatches += 1;
  }
  return joint;
}

EvalResult evaluate_policies(const std::vector<nets::GaussianPolicy>& policies,
                             const envs::MarkovGameEnv& env_proto, ExecLatentMode mode,
                             int episodes, std::uint64_t seed, bool deterministic) {
  EvalResult res;
  res.episodes = episodes;
  if (episodes <= 0) return res;
  std::vector<double> returns;
  returns.reserve(static_cast<std::size_t>(episodes));
  for (int ep = 0; ep < episodes; ++ep) {
    auto env = env_proto.clone();
    ExecSession session(policies, mode, derive_seed(seed, 0x5e55 + static_cast<std::uint64_t>(ep)),
                        deterministic);
    auto obs = env->reset(derive_seed(seed, 0xe400 + static_cast<std::uint64_t>(ep)));
    double ret = 0.0;
    while (true) {
      const auto actions = session.act(obs);
      const auto sr = env->step(actions);
      ret += sr.reward;
      obs = sr.obs;
      if (sr.done()) break;
    }
    returns.push_back(ret);
    res.audit.own_reads += session.audit().own_reads;
    res.audit.cross_reads += session.audit().cross_reads;
    res.audit.steps += session.audit().steps;
    res.audit.z_mismatches += session.audit().z_mismatches;
  }
  double mean = 0.0;
  for (double r : returns) mean += r;
  mean /= returns.size();
  double var = 0.0;
  for (double r : returns) var += (r - mean) * (r - mean);
  var /= returns.size();
  res.mean_return = mean;
  res.std_return = std::sqrt(var);
  return res;
}

}  // namespace vmac::marl
