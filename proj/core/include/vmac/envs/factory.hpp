#pragma once

#include <memory>

#include <json.hpp>

#include "vmac/envs/markov_game.hpp"

namespace vmac::envs {

// Builds an environment from a config object of the form
//   {"name": "coop_nav" | "predator_prey", ...overrides...}
// Unknown names and unknown keys are rejected.
std::unique_ptr<MarkovGameEnv> make_env(const nlohmann::json& config);

nlohmann::json default_env_config(const std::string& name);

}  // namespace vmac::envs
