#pragma once

#include <span>
#include <vector>

namespace vmac::envs {

// Tabular Markov game with explicit transition and reward arrays, used by the
// exact-computation checks. Joint actions index row-major over agents.
struct DiscreteGame {
  int n_states = 0;
  int n_agents = 0;
  std::vector<int> action_counts;  // per agent
  // transition[s * A * n_states + a * n_states + s'] with A = joint_action_count()
  std::vector<double> transition;
  // reward[s * A + a], shared by all agents
  std::vector<double> reward;
  double gamma = 0.9;

  int joint_action_count() const;
  int joint_index(std::span<const int> actions) const;
  std::vector<int> split_joint(int joint) const;
  double trans(int s, int a, int s2) const;
  double rew(int s, int a) const { return reward[static_cast<std::size_t>(s) * joint_action_count() + a]; }

  // Checks dimensions, gamma in [0, 1), and that each transition row sums to
  // one within 1e-12. Throws std::invalid_argument otherwise.
  void validate() const;
};

}  // namespace vmac::envs
