#pragma once

#include <span>
#include <string>
#include <vector>

#include "vmac/diff/tape.hpp"
#include "vmac/rng.hpp"

namespace vmac::nets {

struct PolicySample {
  std::vector<double> action;    // tanh-squashed, each component in (-1, 1)
  std::vector<double> pre_tanh;  // mu + std * eps
  double log_prob = 0.0;         // squashed-Gaussian density of `action`
};

// Latent-conditioned squashed-Gaussian policy: a ReLU trunk over (obs ++ z)
// with separate mean and log-std heads. log-std is clamped to [-20, 2];
// actions are tanh(mu + exp(log_std) * eps) with the change-of-variables
// correction applied to the log-density. Noise is injected by the caller so
// sampling is a deterministic function of (obs, z, eps, parameters).
class GaussianPolicy {
 public:
  static constexpr double kLogStdMin = -20.0;
  static constexpr double kLogStdMax = 2.0;
  static constexpr double kSquashEps = 1e-6;

  GaussianPolicy() = default;
  GaussianPolicy(int obs_dim, int act_dim, int latent_dim, const std::vector<int>& hidden,
                 Rng& rng);

  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  int latent_dim() const { return latent_dim_; }

  PolicySample sample_raw(std::span<const double> obs, std::span<const double> z,
                          std::span<const double> eps) const;
  // Batched variant; obs [B, obs_dim], z [B, latent_dim], eps [B, act_dim];
  // writes actions [B, act_dim] and log-probs [B].
  void sample_raw_batch(const double* obs, const double* z, const double* eps, int batch,
                        double* actions_out, double* log_probs_out) const;
  // tanh(mu), the zero-noise action.
  std::vector<double> mean_action_raw(std::span<const double> obs,
                                      std::span<const double> z) const;

  struct TapedSample {
    diff::Value action;    // [B, act_dim]
    diff::Value log_prob;  // [B]
  };
  // obs [B, obs_dim], z [B, latent_dim], eps [B, act_dim]; all typically
  // constants on the tape, with this policy's parameters as leaves.
  TapedSample sample(diff::Tape& tape, const diff::Value& obs, const diff::Value& z,
                     const diff::Value& eps);

  std::vector<diff::Tensor*> params();
  std::vector<std::pair<std::string, diff::Tensor*>> named_params(const std::string& prefix);
  void copy_params_from(const GaussianPolicy& other);
  void soft_update_from(const GaussianPolicy& other, double tau);

 private:
  void check_dims(std::size_t obs, std::size_t z, std::size_t eps) const;
  // Writes mu and clamped log_std for a batch of inputs [B, obs+latent].
  void heads_raw_batch(const double* input, int batch, double* mu, double* log_std) const;

  int obs_dim_ = 0;
  int act_dim_ = 0;
  int latent_dim_ = 0;
  std::vector<diff::Tensor> trunk_w_, trunk_b_;
  diff::Tensor mu_w_, mu_b_, ls_w_, ls_b_;
};

}  // namespace vmac::nets
