#pragma once

#include "vmac/envs/markov_game.hpp"
#include "vmac/rng.hpp"

namespace vmac::envs {

struct PredatorPreyConfig {
  int n_predators = 3;
  int n_preys = 16;           // laid out on a square lattice
  int capture_quota = 1;      // C predators must be in range simultaneously
  double team_reward = 10.0;  // R1, doubles after each full clear
  int horizon = 100;
  double capture_radius = 0.1;
  double lattice_half_span = 0.6;
  Kinematics kin;
};

// Team reward for one step: R1 * 2^round * captures.
double pp_reward(int captures, int round, const PredatorPreyConfig& cfg);

// Indices of preys captured this instant: alive preys with at least
// `capture_quota` predators within `capture_radius`.
std::vector<int> pp_captures(const std::vector<double>& predator_pos,
                             const std::vector<double>& prey_pos,
                             const std::vector<char>& alive, const PredatorPreyConfig& cfg);

// Continuous predator-prey. Preys are static and respawn on the same lattice
// once all are captured, doubling the team reward. Observation layout per
// predator:
//   [own pos (2), own vel (2),
//    other predators relative (2 each, by index),
//    per prey: relative position (2) and alive flag (1)].
class PredatorPreyEnv final : public MarkovGameEnv {
 public:
  explicit PredatorPreyEnv(PredatorPreyConfig cfg = {});

  std::string name() const override { return "predator_prey"; }
  int n_agents() const override { return cfg_.n_predators; }
  int obs_dim(int agent) const override;
  int action_dim(int) const override { return 2; }
  int horizon() const override { return cfg_.horizon; }

  JointObs reset(std::uint64_t seed) override;
  StepResult step(const JointAction& actions) override;
  std::unique_ptr<MarkovGameEnv> clone() const override;
  std::int64_t clipped_action_count() const override { return clipped_; }

  const PredatorPreyConfig& config() const { return cfg_; }
  int round() const { return round_; }
  int alive_count() const;
  const std::vector<double>& prey_positions() const { return prey_pos_; }
  // Fixed lattice the preys always (re)spawn on.
  static std::vector<double> lattice_positions(int n_preys, double half_span);

 private:
  JointObs observe() const;

  PredatorPreyConfig cfg_;
  std::vector<double> pos_, vel_, prey_pos_;
  std::vector<char> alive_;
  int captured_total_ = 0;  // within the current round
  int round_ = 0;
  int t_ = 0;
  bool done_ = true;
  std::int64_t clipped_ = 0;
};

}  // namespace vmac::envs
