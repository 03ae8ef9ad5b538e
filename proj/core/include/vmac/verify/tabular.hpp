#pragma once

#include <vector>

#include "vmac/envs/discrete_game.hpp"
#include "vmac/rng.hpp"
#include "vmac/verify/mi.hpp"

namespace vmac::verify {

// Finite latent-conditioned product policy: all agents share one latent draw
// per step, so the marginal joint Sum_z p(z) * prod_i pi_i(a_i | s, z) can be
// correlated even though each conditional factorizes.
struct TabularPolicy {
  int n_states = 0;
  int n_agents = 0;
  int n_latent = 1;
  std::vector<int> action_counts;
  std::vector<double> latent_pmf;            // [n_latent]
  std::vector<std::vector<double>> tables;   // per agent: [S * Z * A_i], row-major

  double prob(int agent, int s, int z, int a) const;
  double& prob_ref(int agent, int s, int z, int a);

  // Exact marginalization over the latent variable.
  std::vector<double> joint_pmf(const envs::DiscreteGame& game, int s) const;  // [A_joint]
  std::vector<double> marginal(int s, int agent) const;                        // [A_i]
  DiscreteJoint pair_marginal(int s, int i, int j) const;

  void validate() const;
};

// Per-state conditional action tables q(a_j | a_i, s) for every ordered agent
// pair, the tabular form of the variational distribution.
struct TabularVariational {
  int n_agents = 0;
  int n_states = 0;
  // cond[i * n_agents + j][s] = q(a_j | a_i, s); empty Conditional when i == j
  std::vector<std::vector<Conditional>> cond;

  const Conditional& q(int i, int j, int s) const;
  Conditional& q_ref(int i, int j, int s);
  // log of q^(i,j)(a_i, a_j, s) = q(a_i | a_j, s) * q(a_j | a_i, s)
  double log_pair(int i, int j, int s, int a_i, int a_j) const;
};

// Exact marginal joint of agents (i, j) at state s.
DiscreteJoint latent_marginal(const TabularPolicy& policy, int s, int i = 0, int j = 1);

struct ValueResult {
  std::vector<double> v;  // [S]
  std::vector<double> q;  // [S * A_joint]
};

// Exact fixed point of the entropy- and prediction-augmented evaluation
// equations for agent `agent`, via a direct linear solve of
// (I - gamma * P_pi) V = r_pi with the augmented per-state reward.
ValueResult exact_value(const envs::DiscreteGame& game, const TabularPolicy& policy,
                        const TabularVariational& q, double beta, int agent);

// One application of the augmented Bellman operator to Q.
std::vector<double> bellman_apply(const envs::DiscreteGame& game, const TabularPolicy& policy,
                                  const TabularVariational& q, double beta, int agent,
                                  const std::vector<double>& q_table);

struct ImprovementResult {
  TabularPolicy policy;
  TabularVariational q;
  double min_delta_q = 0.0;  // min over (s, a) of Q_new - Q_old
  double max_delta_q = 0.0;
  bool changed = false;
};

// One coordinate-ascent step for `agent`: maximizes the evaluated objective
// over a finite candidate set (every deterministic per-(s, z) assignment plus
// the current policy) holding the other agents fixed, re-deriving the
// conditionals of every pair involving `agent` as the exact conditionals of
// the candidate joint. ties keep the current policy.
ImprovementResult improvement_step(const envs::DiscreteGame& game, const TabularPolicy& policy,
                                   const TabularVariational& q, double beta, int agent);

// ---- random fixtures for the oracle sweeps ----
envs::DiscreteGame random_game(Rng& rng, int n_states, std::vector<int> action_counts,
                               double gamma, double reward_scale = 1.0);
TabularPolicy random_policy(Rng& rng, const envs::DiscreteGame& game, int n_latent);
TabularVariational random_variational(Rng& rng, const envs::DiscreteGame& game);
// Exact conditionals of the policy's pair marginals (tight variational tables).
TabularVariational conditionals_of(const TabularPolicy& policy);

}  // namespace vmac::verify
