#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace vmac::marl {

enum class Algorithm { vm3ac, masac, isac, maac, maddpg };
enum class ExecLatentMode { zero, seeded };

Algorithm algorithm_from_string(const std::string& s);
std::string to_string(Algorithm a);
ExecLatentMode exec_mode_from_string(const std::string& s);
std::string to_string(ExecLatentMode m);

struct AlgoConfig {
  Algorithm algorithm = Algorithm::vm3ac;
  double beta = 0.1;
  int latent_dim = 8;
  double gamma = 0.99;
  double lr = 3e-4;
  int batch_size = 128;
  double tau = 0.005;
  int mc_samples = 1;  // latent marginalization samples; only 1 is supported
  double sigma_q = 1.0;
  // multiplier on the action-prediction terms; 0 drops them entirely, which
  // turns vm3ac into masac on the same latent dimension
  double variational_coef = 1.0;
  // critics see only (o_i, a_i); forced for isac, selectable for masac/maac
  bool critic_local = false;
  ExecLatentMode exec_latent_mode = ExecLatentMode::zero;
  std::vector<int> hidden = {128, 128};
  std::size_t buffer_capacity = 500000;
  int warmup_steps = 1000;
  int update_every = 1;
  // actor (and predictor) step once per this many gradient passes; critics
  // and targets step every pass
  int policy_update_every = 1;
  // global L2 gradient-norm clip per network, 0 disables
  double grad_clip = 0.0;
  double exploration_noise = 0.1;  // maddpg, annealed linearly
  double exploration_noise_final = 0.01;

  // Applies algorithm-implied fields (isac forces a local critic; the
  // non-variational family forces variational_coef = 0).
  AlgoConfig normalized() const;
  // Rejects contradictions (negative beta/latent, maddpg with beta or latent
  // terms, maac with entropy, vm3ac with a local critic, ...).
  void validate() const;

  nlohmann::json to_json() const;
  static AlgoConfig from_json(const nlohmann::json& j);
};

// Temperature and latent-dimension defaults per task.
double default_beta(const std::string& env_name, int n_agents);
int default_latent_dim(const std::string& env_name, int n_agents);

}  // namespace vmac::marl
