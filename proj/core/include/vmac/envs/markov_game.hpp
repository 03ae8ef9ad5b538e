#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace vmac::envs {

using Obs = std::vector<double>;
using JointObs = std::vector<Obs>;
using JointAction = std::vector<std::vector<double>>;

struct StepResult {
  JointObs obs;
  double reward = 0.0;
  bool terminal = false;   // true environment termination
  bool truncated = false;  // horizon reached
  bool done() const { return terminal || truncated; }
};

// N-agent game with continuous actions in [-1, 1]^d and one shared
// cooperative reward. reset(seed) followed by an identical action sequence
// yields a bit-identical trajectory.
class MarkovGameEnv {
 public:
  virtual ~MarkovGameEnv() = default;

  virtual std::string name() const = 0;
  virtual int n_agents() const = 0;
  virtual int obs_dim(int agent) const = 0;
  virtual int action_dim(int agent) const = 0;
  virtual int horizon() const = 0;

  virtual JointObs reset(std::uint64_t seed) = 0;
  // Components outside [-1, 1] are clipped; the clip count is queryable.
  virtual StepResult step(const JointAction& actions) = 0;

  virtual std::unique_ptr<MarkovGameEnv> clone() const = 0;

  virtual std::int64_t clipped_action_count() const { return 0; }
};

// Shared particle kinematics: damped velocity, force scaled from the action,
// explicit Euler position update, positions clamped to the world box.
struct Kinematics {
  double dt = 0.1;
  double damping = 0.25;
  double accel = 3.0;
  double max_speed = 1.3;
  double world_half_width = 1.0;
};

void integrate_particle(const Kinematics& k, const double* force, double* pos, double* vel);

}  // namespace vmac::envs
