#pragma once

#include "vmac/envs/markov_game.hpp"
#include "vmac/rng.hpp"

namespace vmac::envs {

struct CoopNavConfig {
  int n_agents = 3;
  int n_landmarks = 3;
  double collision_penalty = 10.0;  // R2, applied once per colliding pair
  double occupancy_bonus = 1.0;     // R3, when every landmark is occupied
  int horizon = 50;
  double agent_radius = 0.1;
  double landmark_radius = 0.05;
  Kinematics kin;
};

// Shared reward as a pure function of geometry:
//   -sum_l min_i dist(agent_i, landmark_l)
//   - R2 * (# colliding agent pairs)
//   + R3 * [every landmark occupied]
// Agents collide when closer than 2*agent_radius; a landmark is occupied
// when some agent is within agent_radius + landmark_radius of it.
double coopnav_reward(const std::vector<double>& agent_pos,
                      const std::vector<double>& landmark_pos, const CoopNavConfig& cfg);

// Cooperative navigation: N agents must cover L landmarks while avoiding
// each other. Observation layout per agent, all in world coordinates:
//   [own pos (2), own vel (2),
//    other agents' positions relative to self (2 each, by agent index),
//    landmark positions relative to self (2 each)].
class CoopNavEnv final : public MarkovGameEnv {
 public:
  explicit CoopNavEnv(CoopNavConfig cfg = {});

  std::string name() const override { return "coop_nav"; }
  int n_agents() const override { return cfg_.n_agents; }
  int obs_dim(int agent) const override;
  int action_dim(int) const override { return 2; }
  int horizon() const override { return cfg_.horizon; }

  JointObs reset(std::uint64_t seed) override;
  StepResult step(const JointAction& actions) override;
  std::unique_ptr<MarkovGameEnv> clone() const override;
  std::int64_t clipped_action_count() const override { return clipped_; }

  const CoopNavConfig& config() const { return cfg_; }
  // Largest per-step |reward| reachable under this configuration.
  double max_abs_reward() const;

 private:
  JointObs observe() const;

  CoopNavConfig cfg_;
  std::vector<double> pos_, vel_, landmarks_;
  int t_ = 0;
  bool done_ = true;
  std::int64_t clipped_ = 0;
};

}  // namespace vmac::envs
