#include "vmac/envs/discrete_game.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace vmac::envs {

int DiscreteGame::joint_action_count() const {
  int a = 1;
  for (int c : action_counts) a *= c;
  return a;
}

int DiscreteGame::joint_index(std::span<const int> actions) const {
  int idx = 0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    idx = idx * action_counts[i] + actions[i];
  }
  return idx;
}

std::vector<int> DiscreteGame::split_joint(int joint) const {
  std::vector<int> out(action_counts.size());
  for (int i = static_cast<int>(action_counts.size()) - 1; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = joint % action_counts[static_cast<std::size_t>(i)];
    joint /= action_counts[static_cast<std::size_t>(i)];
  }
  return out;
}

double DiscreteGame::trans(int s, int a, int s2) const {
  const std::size_t stride = static_cast<std::size_t>(joint_action_count()) * n_states;
  return transition[static_cast<std::size_t>(s) * stride +
                    static_cast<std::size_t>(a) * n_states + s2];
}

void DiscreteGame::validate() const {
  if (n_states < 1 || n_agents < 1) {
    throw std::invalid_argument("DiscreteGame: needs at least one state and agent");
  }
  if (static_cast<int>(action_counts.size()) != n_agents) {
    throw std::invalid_argument("DiscreteGame: action_counts size mismatch");
  }
  for (int c : action_counts) {
    if (c < 1) throw std::invalid_argument("DiscreteGame: empty action set");
  }
  const int a_joint = joint_action_count();
  if (static_cast<std::size_t>(n_states) * a_joint * n_states != transition.size()) {
    throw std::invalid_argument("DiscreteGame: transition array size mismatch");
  }
  if (static_cast<std::size_t>(n_states) * a_joint != reward.size()) {
    throw std::invalid_argument("DiscreteGame: reward array size mismatch");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("DiscreteGame: gamma must lie in [0, 1)");
  }
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < a_joint; ++a) {
      double row = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) {
        const double p = trans(s, a, s2);
        if (p < 0.0) throw std::invalid_argument("DiscreteGame: negative transition entry");
        row += p;
      }
      if (std::abs(row - 1.0) > 1e-12) {
        throw std::invalid_argument("DiscreteGame: transition row (s=" + std::to_string(s) +
                                    ", a=" + std::to_string(a) + ") sums to " +
                                    std::to_string(row));
      }
    }
  }
}

}  // namespace vmac::envs
