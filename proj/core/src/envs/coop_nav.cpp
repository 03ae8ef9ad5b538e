#include "vmac/envs/coop_nav.hpp"

#include <cmath>
#include <stdexcept>

namespace vmac::envs {

void integrate_particle(const Kinematics& k, const double* force, double* pos, double* vel) {
  for (int d = 0; d < 2; ++d) {
    vel[d] = vel[d] * (1.0 - k.damping) + force[d] * k.dt;
  }
  const double speed = std::sqrt(vel[0] * vel[0] + vel[1] * vel[1]);
  if (speed > k.max_speed) {
    const double s = k.max_speed / speed;
    vel[0] *= s;
    vel[1] *= s;
  }
  for (int d = 0; d < 2; ++d) {
    pos[d] += vel[d] * k.dt;
    if (pos[d] > k.world_half_width) pos[d] = k.world_half_width;
    if (pos[d] < -k.world_half_width) pos[d] = -k.world_half_width;
  }
}

namespace {

double dist2d(const double* a, const double* b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

double coopnav_reward(const std::vector<double>& agent_pos,
                      const std::vector<double>& landmark_pos, const CoopNavConfig& cfg) {
  const int n = cfg.n_agents;
  const int l = cfg.n_landmarks;
  const double occupy_radius = cfg.agent_radius + cfg.landmark_radius;

  double reward = 0.0;
  bool all_occupied = true;
  for (int lm = 0; lm < l; ++lm) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      best = std::min(best, dist2d(&agent_pos[2 * i], &landmark_pos[2 * lm]));
    }
    reward -= best;
    all_occupied = all_occupied && best < occupy_radius;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (dist2d(&agent_pos[2 * i], &agent_pos[2 * j]) < 2.0 * cfg.agent_radius) {
        reward -= cfg.collision_penalty;
      }
    }
  }
  if (all_occupied) reward += cfg.occupancy_bonus;
  return reward;
}

CoopNavEnv::CoopNavEnv(CoopNavConfig cfg) : cfg_(cfg) {
  if (cfg_.n_agents < 1 || cfg_.n_landmarks < 1 || cfg_.horizon < 1) {
    throw std::invalid_argument("CoopNavEnv: bad configuration");
  }
}

int CoopNavEnv::obs_dim(int) const {
  return 4 + 2 * (cfg_.n_agents - 1) + 2 * cfg_.n_landmarks;
}

JointObs CoopNavEnv::reset(std::uint64_t seed) {
  Rng rng(seed);
  const double w = cfg_.kin.world_half_width;
  pos_.resize(2 * static_cast<std::size_t>(cfg_.n_agents));
  vel_.assign(2 * static_cast<std::size_t>(cfg_.n_agents), 0.0);
  landmarks_.resize(2 * static_cast<std::size_t>(cfg_.n_landmarks));
  for (double& p : pos_) p = rng.uniform(-w, w);
  for (double& p : landmarks_) p = rng.uniform(-w, w);
  t_ = 0;
  done_ = false;
  return observe();
}

JointObs CoopNavEnv::observe() const {
  JointObs all(static_cast<std::size_t>(cfg_.n_agents));
  for (int i = 0; i < cfg_.n_agents; ++i) {
    Obs& o = all[static_cast<std::size_t>(i)];
    o.reserve(static_cast<std::size_t>(obs_dim(i)));
    o.push_back(pos_[2 * i]);
    o.push_back(pos_[2 * i + 1]);
    o.push_back(vel_[2 * i]);
    o.push_back(vel_[2 * i + 1]);
    for (int j = 0; j < cfg_.n_agents; ++j) {
      if (j == i) continue;
      o.push_back(pos_[2 * j] - pos_[2 * i]);
      o.push_back(pos_[2 * j + 1] - pos_[2 * i + 1]);
    }
    for (int lm = 0; lm < cfg_.n_landmarks; ++lm) {
      o.push_back(landmarks_[2 * lm] - pos_[2 * i]);
      o.push_back(landmarks_[2 * lm + 1] - pos_[2 * i + 1]);
    }
  }
  return all;
}

StepResult CoopNavEnv::step(const JointAction& actions) {
  if (done_) throw std::logic_error("CoopNavEnv::step called on a finished episode");
  if (static_cast<int>(actions.size()) != cfg_.n_agents) {
    throw std::invalid_argument("CoopNavEnv::step: expected one action per agent");
  }
  for (int i = 0; i < cfg_.n_agents; ++i) {
    double force[2];
    for (int d = 0; d < 2; ++d) {
      double a = actions[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
      if (a > 1.0 || a < -1.0) {
        ++clipped_;
        a = a > 1.0 ? 1.0 : -1.0;
      }
      force[d] = a * cfg_.kin.accel;
    }
    integrate_particle(cfg_.kin, force, &pos_[2 * i], &vel_[2 * i]);
  }
  t_ += 1;
  StepResult r;
  r.reward = coopnav_reward(pos_, landmarks_, cfg_);
  r.truncated = t_ >= cfg_.horizon;
  r.terminal = false;
  done_ = r.done();
  r.obs = observe();
  return r;
}

std::unique_ptr<MarkovGameEnv> CoopNavEnv::clone() const {
  return std::make_unique<CoopNavEnv>(*this);
}

double CoopNavEnv::max_abs_reward() const {
  const double w = cfg_.kin.world_half_width;
  const double diag = 2.0 * std::sqrt(2.0) * w;
  const double pairs = cfg_.n_agents * (cfg_.n_agents - 1) / 2.0;
  return cfg_.n_landmarks * diag + pairs * cfg_.collision_penalty + cfg_.occupancy_bonus;
}

}  // namespace vmac::envs
