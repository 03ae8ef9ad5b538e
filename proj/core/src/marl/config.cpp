#include "vmac/marl/config.hpp"

#include <stdexcept>

namespace vmac::marl {

using nlohmann::json;

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "vm3ac") return Algorithm::vm3ac;
  if (s == "masac") return Algorithm::masac;
  if (s == "isac") return Algorithm::isac;
  if (s == "maac") return Algorithm::maac;
  if (s == "maddpg") return Algorithm::maddpg;
  throw std::invalid_argument("unknown algorithm '" + s +
                              "' (expected vm3ac|masac|isac|maac|maddpg)");
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::vm3ac: return "vm3ac";
    case Algorithm::masac: return "masac";
    case Algorithm::isac: return "isac";
    case Algorithm::maac: return "maac";
    case Algorithm::maddpg: return "maddpg";
  }
  return "?";
}

ExecLatentMode exec_mode_from_string(const std::string& s) {
  if (s == "zero") return ExecLatentMode::zero;
  if (s == "seeded") return ExecLatentMode::seeded;
  throw std::invalid_argument("unknown execution latent mode '" + s +
                              "' (expected zero|seeded)");
}

std::string to_string(ExecLatentMode m) {
  return m == ExecLatentMode::zero ? "zero" : "seeded";
}

AlgoConfig AlgoConfig::normalized() const {
  AlgoConfig c = *this;
  if (c.algorithm != Algorithm::vm3ac) c.variational_coef = 0.0;
  if (c.algorithm == Algorithm::isac) c.critic_local = true;
  return c;
}

void AlgoConfig::validate() const {
  if (beta < 0.0) throw std::invalid_argument("config: beta must be >= 0");
  if (latent_dim < 0) throw std::invalid_argument("config: latent_dim must be >= 0");
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("config: gamma must lie in [0, 1)");
  }
  if (lr <= 0.0) throw std::invalid_argument("config: lr must be positive");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("config: tau must lie in [0, 1]");
  if (mc_samples != 1) {
    throw std::invalid_argument("config: only mc_samples = 1 is supported");
  }
  if (sigma_q <= 0.0) throw std::invalid_argument("config: sigma_q must be positive");
  if (hidden.empty()) throw std::invalid_argument("config: hidden layers must be non-empty");
  if (update_every < 1) throw std::invalid_argument("config: update_every must be >= 1");
  if (policy_update_every < 1) {
    throw std::invalid_argument("config: policy_update_every must be >= 1");
  }
  if (grad_clip < 0.0) throw std::invalid_argument("config: grad_clip must be >= 0");
  if (warmup_steps < 0) throw std::invalid_argument("config: warmup_steps must be >= 0");

  switch (algorithm) {
    case Algorithm::maddpg:
      if (beta != 0.0 || latent_dim != 0) {
        throw std::invalid_argument("config: maddpg forbids beta and latent terms");
      }
      if (critic_local) {
        throw std::invalid_argument("config: maddpg uses the centralized critic");
      }
      break;
    case Algorithm::maac:
      if (beta != 0.0) {
        throw std::invalid_argument("config: maac has no entropy term; set beta = 0");
      }
      break;
    case Algorithm::vm3ac:
      if (critic_local) {
        throw std::invalid_argument("config: vm3ac requires the centralized critic");
      }
      break;
    case Algorithm::masac:
    case Algorithm::isac:
      break;
  }
}

json AlgoConfig::to_json() const {
  return json{{"algorithm", to_string(algorithm)},
              {"beta", beta},
              {"latent_dim", latent_dim},
              {"gamma", gamma},
              {"lr", lr},
              {"batch_size", batch_size},
              {"tau", tau},
              {"mc_samples", mc_samples},
              {"sigma_q", sigma_q},
              {"variational_coef", variational_coef},
              {"critic_local", critic_local},
              {"exec_latent_mode", to_string(exec_latent_mode)},
              {"hidden", hidden},
              {"buffer_capacity", buffer_capacity},
              {"warmup_steps", warmup_steps},
              {"update_every", update_every},
              {"policy_update_every", policy_update_every},
              {"grad_clip", grad_clip},
              {"exploration_noise", exploration_noise},
              {"exploration_noise_final", exploration_noise_final}};
}

AlgoConfig AlgoConfig::from_json(const json& j) {
  AlgoConfig c;
  for (const auto& [key, _] : j.items()) {
    static const char* known[] = {"algorithm",        "beta",
                                  "latent_dim",       "gamma",
                                  "lr",               "batch_size",
                                  "tau",              "mc_samples",
                                  "sigma_q",          "variational_coef",
                                  "critic_local",     "exec_latent_mode",
                                  "hidden",           "buffer_capacity",
                                  "warmup_steps",     "update_every",
                                  "policy_update_every", "grad_clip",
                                  "exploration_noise", "exploration_noise_final"};
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument("algo config: unknown key '" + key + "'");
  }
  if (j.contains("algorithm")) c.algorithm = algorithm_from_string(j["algorithm"]);
  c.beta = j.value("beta", c.beta);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.gamma = j.value("gamma", c.gamma);
  c.lr = j.value("lr", c.lr);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.tau = j.value("tau", c.tau);
  c.mc_samples = j.value("mc_samples", c.mc_samples);
  c.sigma_q = j.value("sigma_q", c.sigma_q);
  c.variational_coef = j.value("variational_coef", c.variational_coef);
  c.critic_local = j.value("critic_local", c.critic_local);
  if (j.contains("exec_latent_mode")) {
    c.exec_latent_mode = exec_mode_from_string(j["exec_latent_mode"]);
  }
  c.hidden = j.value("hidden", c.hidden);
  c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.update_every = j.value("update_every", c.update_every);
  c.policy_update_every = j.value("policy_update_every", c.policy_update_every);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.exploration_noise = j.value("exploration_noise", c.exploration_noise);
  c.exploration_noise_final = j.value("exploration_noise_final", c.exploration_noise_final);
  return c;
}

double default_beta(const std::string& env_name, int n_agents) {
  if (env_name == "predator_prey") {
    if (n_agents == 2) return 0.05;
    if (n_agents == 3) return 0.1;
    return 0.05;
  }
  if (env_name == "coop_nav") return 0.1;
  return 0.05;
}

int default_latent_dim(const std::string& env_name, int n_agents) {
  if (env_name == "predator_prey") {
    if (n_agents == 2) return 4;
    if (n_agents == 3) return 2;
    return 4;
  }
  if (env_name == "coop_nav") return 8;
  return 8;
}

}  // namespace vmac::marl
