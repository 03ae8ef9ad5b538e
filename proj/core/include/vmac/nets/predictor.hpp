#pragma once

#include <span>
#include <string>
#include <vector>

#include "vmac/nets/mlp.hpp"

namespace vmac::nets {

// One agent's action predictor: a single network shared over all partners,
// selected by a one-hot index. Given a source agent's action and both
// observations it emits the mean of a fixed-variance Gaussian over the
// partner direction's action:
//
//   input  = source_action ++ source_obs ++ target_obs ++ onehot(partner)
//   output = predicted mean of target_action (tanh, so within (-1, 1))
//
// Both conditional directions of a pair reuse the same network by swapping
// the source/target roles while keeping the partner one-hot fixed.
class VariationalPredictor {
 public:
  VariationalPredictor() = default;
  VariationalPredictor(int owner, int n_agents, int obs_dim, int act_dim, double sigma,
                       const std::vector<int>& hidden, Rng& rng);

  int owner() const { return owner_; }
  int n_agents() const { return n_agents_; }
  double sigma() const { return sigma_; }
  int act_dim() const { return act_dim_; }

  // log N(target_action; mu(source...), sigma^2 I)
  double log_prob_raw(std::span<const double> target_action,
                      std::span<const double> source_action,
                      std::span<const double> source_obs, std::span<const double> target_obs,
                      int partner) const;
  // Batched: rows of each argument; writes [B] log-probs.
  void log_prob_raw_batch(const double* target_action, const double* source_action,
                          const double* source_obs, const double* target_obs, int partner,
                          int batch, double* out) const;
  std::vector<double> predict_mean_raw(std::span<const double> source_action,
                                       std::span<const double> source_obs,
                                       std::span<const double> target_obs, int partner) const;

  // Taped variant; parameters are leaves, all data arguments are whatever the
  // caller built them as (constants or differentiable nodes).
  diff::Value log_prob(diff::Tape& tape, const diff::Value& target_action,
                       const diff::Value& source_action, const diff::Value& source_obs,
                       const diff::Value& target_obs, int partner);

  std::vector<diff::Tensor*> params() { return net_.params(); }
  std::vector<std::pair<std::string, diff::Tensor*>> named_params(const std::string& prefix) {
    return net_.named_params(prefix);
  }

 private:
  void check_partner(int partner) const;
  std::vector<double> assemble_batch(const double* source_action, const double* source_obs,
                                     const double* target_obs, int partner, int batch) const;

  int owner_ = 0;
  int n_agents_ = 0;
  int obs_dim_ = 0;
  int act_dim_ = 0;
  double sigma_ = 1.0;
  Mlp net_;
};

}  // namespace vmac::nets
