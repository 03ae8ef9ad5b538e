#include "vmac/envs/factory.hpp"

#include <stdexcept>

#include "vmac/envs/coop_nav.hpp"
#include "vmac/envs/predator_prey.hpp"

namespace vmac::envs {

using nlohmann::json;

namespace {

Kinematics kinematics_from(const json& j, const Kinematics& defaults) {
  Kinematics k = defaults;
  k.dt = j.value("dt", k.dt);
  k.damping = j.value("damping", k.damping);
  k.accel = j.value("accel", k.accel);
  k.max_speed = j.value("max_speed", k.max_speed);
  k.world_half_width = j.value("world_half_width", k.world_half_width);
  return k;
}

void reject_unknown(const json& j, std::initializer_list<const char*> known) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument("env config: unknown key '" + key + "'");
  }
}

}  // namespace

std::unique_ptr<MarkovGameEnv> make_env(const json& config) {
  const std::string name = config.at("name").get<std::string>();
  if (name == "coop_nav") {
    reject_unknown(config, {"name", "n_agents", "n_landmarks", "collision_penalty",
                            "occupancy_bonus", "horizon", "agent_radius", "landmark_radius",
                            "dt", "damping", "accel", "max_speed", "world_half_width"});
    CoopNavConfig c;
    c.n_agents = config.value("n_agents", c.n_agents);
    c.n_landmarks = config.value("n_landmarks", c.n_landmarks);
    c.collision_penalty = config.value("collision_penalty", c.collision_penalty);
    c.occupancy_bonus = config.value("occupancy_bonus", c.occupancy_bonus);
    c.horizon = config.value("horizon", c.horizon);
    c.agent_radius = config.value("agent_radius", c.agent_radius);
    c.landmark_radius = config.value("landmark_radius", c.landmark_radius);
    c.kin = kinematics_from(config, c.kin);
    return std::make_unique<CoopNavEnv>(c);
  }
  if (name == "predator_prey") {
    reject_unknown(config, {"name", "n_predators", "n_preys", "capture_quota", "team_reward",
                            "horizon", "capture_radius", "lattice_half_span", "dt", "damping",
                            "accel", "max_speed", "world_half_width"});
    PredatorPreyConfig c;
    c.n_predators = config.value("n_predators", c.n_predators);
    c.n_preys = config.value("n_preys", c.n_preys);
    c.capture_quota = config.value("capture_quota", c.capture_quota);
    c.team_reward = config.value("team_reward", c.team_reward);
    c.horizon = config.value("horizon", c.horizon);
    c.capture_radius = config.value("capture_radius", c.capture_radius);
    c.lattice_half_span = config.value("lattice_half_span", c.lattice_half_span);
    c.kin = kinematics_from(config, c.kin);
    return std::make_unique<PredatorPreyEnv>(c);
  }
  throw std::invalid_argument("env config: unknown environment '" + name + "'");
}

json default_env_config(const std::string& name) {
  if (name == "coop_nav") {
    CoopNavConfig c;
    return json{{"name", "coop_nav"},
                {"n_agents", c.n_agents},
                {"n_landmarks", c.n_landmarks},
                {"collision_penalty", c.collision_penalty},
                {"occupancy_bonus", c.occupancy_bonus},
                {"horizon", c.horizon}};
  }
  if (name == "predator_prey") {
    PredatorPreyConfig c;
    return json{{"name", "predator_prey"},
                {"n_predators", c.n_predators},
                {"n_preys", c.n_preys},
                {"capture_quota", c.capture_quota},
                {"team_reward", c.team_reward},
                {"horizon", c.horizon}};
  }
  throw std::invalid_argument("unknown environment '" + name + "'");
}

}  // namespace vmac::envs
