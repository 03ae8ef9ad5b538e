#include "vmac/envs/predator_prey.hpp"

#include <cmath>
#include <stdexcept>

namespace vmac::envs {

namespace {

double dist2d(const double* a, const double* b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

double pp_reward(int captures, int round, const PredatorPreyConfig& cfg) {
  return cfg.team_reward * std::pow(2.0, static_cast<double>(round)) * captures;
}

std::vector<int> pp_captures(const std::vector<double>& predator_pos,
                             const std::vector<double>& prey_pos,
                             const std::vector<char>& alive, const PredatorPreyConfig& cfg) {
  std::vector<int> captured;
  const int m = static_cast<int>(alive.size());
  for (int p = 0; p < m; ++p) {
    if (!alive[static_cast<std::size_t>(p)]) continue;
    int near = 0;
    for (int i = 0; i < cfg.n_predators; ++i) {
      if (dist2d(&predator_pos[2 * i], &prey_pos[2 * p]) < cfg.capture_radius) ++near;
    }
    if (near >= cfg.capture_quota) captured.push_back(p);
  }
  return captured;
}

std::vector<double> PredatorPreyEnv::lattice_positions(int n_preys, double half_span) {
  const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_preys))));
  std::vector<double> out;
  out.reserve(2 * static_cast<std::size_t>(n_preys));
  for (int p = 0; p < n_preys; ++p) {
    const int r = p / side;
    const int c = p % side;
    const double step = side > 1 ? 2.0 * half_span / (side - 1) : 0.0;
    out.push_back(-half_span + c * step);
    out.push_back(-half_span + r * step);
  }
  return out;
}

PredatorPreyEnv::PredatorPreyEnv(PredatorPreyConfig cfg) : cfg_(cfg) {
  if (cfg_.n_predators < 1 || cfg_.n_preys < 1 || cfg_.capture_quota < 1 ||
      cfg_.capture_quota > cfg_.n_predators || cfg_.horizon < 1) {
    throw std::invalid_argument("PredatorPreyEnv: bad configuration");
  }
}

int PredatorPreyEnv::obs_dim(int) const {
  return 4 + 2 * (cfg_.n_predators - 1) + 3 * cfg_.n_preys;
}

int PredatorPreyEnv::alive_count() const {
  int n = 0;
  for (char a : alive_) n += a ? 1 : 0;
  return n;
}

JointObs PredatorPreyEnv::reset(std::uint64_t seed) {
  Rng rng(seed);
  const double w = cfg_.kin.world_half_width;
  pos_.resize(2 * static_cast<std::size_t>(cfg_.n_predators));
  vel_.assign(2 * static_cast<std::size_t>(cfg_.n_predators), 0.0);
  for (double& p : pos_) p = rng.uniform(-w, w);
  prey_pos_ = lattice_positions(cfg_.n_preys, cfg_.lattice_half_span);
  alive_.assign(static_cast<std::size_t>(cfg_.n_preys), 1);
  captured_total_ = 0;
  round_ = 0;
  t_ = 0;
  done_ = false;
  return observe();
}

JointObs PredatorPreyEnv::observe() const {
  JointObs all(static_cast<std::size_t>(cfg_.n_predators));
  for (int i = 0; i < cfg_.n_predators; ++i) {
    Obs& o = all[static_cast<std::size_t>(i)];
    o.reserve(static_cast<std::size_t>(obs_dim(i)));
    o.push_back(pos_[2 * i]);
    o.push_back(pos_[2 * i + 1]);
    o.push_back(vel_[2 * i]);
    o.push_back(vel_[2 * i + 1]);
    for (int j = 0; j < cfg_.n_predators; ++j) {
      if (j == i) continue;
      o.push_back(pos_[2 * j] - pos_[2 * i]);
      o.push_back(pos_[2 * j + 1] - pos_[2 * i + 1]);
    }
    for (int p = 0; p < cfg_.n_preys; ++p) {
      o.push_back(prey_pos_[2 * p] - pos_[2 * i]);
      o.push_back(prey_pos_[2 * p + 1] - pos_[2 * i + 1]);
      o.push_back(alive_[static_cast<std::size_t>(p)] ? 1.0 : 0.0);
    }
  }
  return all;
}

StepResult PredatorPreyEnv::step(const JointAction& actions) {
  if (done_) throw std::logic_error("PredatorPreyEnv::step called on a finished episode");
  if (static_cast<int>(actions.size()) != cfg_.n_predators) {
    throw std::invalid_argument("PredatorPreyEnv::step: expected one action per predator");
  }
  for (int i = 0; i < cfg_.n_predators; ++i) {
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

  const std::vector<int> captured = pp_captures(pos_, prey_pos_, alive_, cfg_);
  const double reward = pp_reward(static_cast<int>(captured.size()), round_, cfg_);
  for (int p : captured) alive_[static_cast<std::size_t>(p)] = 0;
  captured_total_ += static_cast<int>(captured.size());
  if (captured_total_ == cfg_.n_preys) {
    // full clear: same lattice, next round, doubled team reward
    alive_.assign(static_cast<std::size_t>(cfg_.n_preys), 1);
    captured_total_ = 0;
    round_ += 1;
  }

  t_ += 1;
  StepResult r;
  r.reward = reward;
  r.truncated = t_ >= cfg_.horizon;
  r.terminal = false;
  done_ = r.done();
  r.obs = observe();
  return r;
}

std::unique_ptr<MarkovGameEnv> PredatorPreyEnv::clone() const {
  return std::make_unique<PredatorPreyEnv>(*this);
}

}  // namespace vmac::envs
