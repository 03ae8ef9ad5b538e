#include "vmac/nets/predictor.hpp"

#include <cmath>
#include <stdexcept>

namespace vmac::nets {

using diff::Value;

VariationalPredictor::VariationalPredictor(int owner, int n_agents, int obs_dim, int act_dim,
                                           double sigma, const std::vector<int>& hidden,
                                           Rng& rng)
    : owner_(owner), n_agents_(n_agents), obs_dim_(obs_dim), act_dim_(act_dim), sigma_(sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("VariationalPredictor: sigma must be positive");
  if (owner < 0 || owner >= n_agents) {
    throw std::invalid_argument("VariationalPredictor: owner out of range");
  }
  MlpSpec spec;
  spec.input_dim = act_dim + 2 * obs_dim + n_agents;
  spec.output_dim = act_dim;
  spec.hidden = hidden;
  spec.final_tanh = true;
  net_ = Mlp(spec, rng);
}

void VariationalPredictor::check_partner(int partner) const {
  if (partner == owner_) {
    throw std::invalid_argument("variational predictor: partner equals owner agent " +
                                std::to_string(owner_));
  }
  if (partner < 0 || partner >= n_agents_) {
    throw std::invalid_argument("variational predictor: partner " + std::to_string(partner) +
                                " out of range for " + std::to_string(n_agents_) + " agents");
  }
}

std::vector<double> VariationalPredictor::assemble_batch(const double* source_action,
                                                         const double* source_obs,
                                                         const double* target_obs, int partner,
                                                         int batch) const {
  const int in = act_dim_ + 2 * obs_dim_ + n_agents_;
  std::vector<double> input(static_cast<std::size_t>(batch) * in, 0.0);
  for (int r = 0; r < batch; ++r) {
    double* row = input.data() + static_cast<std::size_t>(r) * in;
    int off = 0;
    for (int j = 0; j < act_dim_; ++j) {
      row[off++] = source_action[static_cast<std::size_t>(r) * act_dim_ + j];
    }
    for (int j = 0; j < obs_dim_; ++j) {
      row[off++] = source_obs[static_cast<std::size_t>(r) * obs_dim_ + j];
    }
    for (int j = 0; j < obs_dim_; ++j) {
      row[off++] = target_obs[static_cast<std::size_t>(r) * obs_dim_ + j];
    }
    row[off + partner] = 1.0;
  }
  return input;
}

void VariationalPredictor::log_prob_raw_batch(const double* target_action,
                                              const double* source_action,
                                              const double* source_obs,
                                              const double* target_obs, int partner, int batch,
                                              double* out) const {
  check_partner(partner);
  const auto input = assemble_batch(source_action, source_obs, target_obs, partner, batch);
  std::vector<double> mu(static_cast<std::size_t>(batch) * act_dim_);
  net_.forward_raw_batch(input.data(), batch, mu.data());
  const double inv2s = -1.0 / (2.0 * (sigma_ * sigma_));
  const double norm = -0.5 * act_dim_ * (diff::kLogTwoPi + 2.0 * std::log(sigma_));
  for (int r = 0; r < batch; ++r) {
    double sq = 0.0;
    for (int j = 0; j < act_dim_; ++j) {
      const std::size_t k = static_cast<std::size_t>(r) * act_dim_ + j;
      const double d = target_action[k] - mu[k];
      sq += d * d;
    }
    out[r] = sq * inv2s + norm;
  }
}

double VariationalPredictor::log_prob_raw(std::span<const double> target_action,
                                          std::span<const double> source_action,
                                          std::span<const double> source_obs,
                                          std::span<const double> target_obs,
                                          int partner) const {
  double out = 0.0;
  log_prob_raw_batch(target_action.data(), source_action.data(), source_obs.data(),
                     target_obs.data(), partner, 1, &out);
  return out;
}

std::vector<double> VariationalPredictor::predict_mean_raw(std::span<const double> source_action,
                                                           std::span<const double> source_obs,
                                                           std::span<const double> target_obs,
                                                           int partner) const {
  check_partner(partner);
  const auto input =
      assemble_batch(source_action.data(), source_obs.data(), target_obs.data(), partner, 1);
  std::vector<double> mu(static_cast<std::size_t>(act_dim_));
  net_.forward_raw_batch(input.data(), 1, mu.data());
  return mu;
}

Value VariationalPredictor::log_prob(diff::Tape& tape, const Value& target_action,
                                     const Value& source_action, const Value& source_obs,
                                     const Value& target_obs, int partner) {
  check_partner(partner);
  const auto& shape = target_action.shape();
  const bool batched = shape.size() == 2;
  const int batch = batched ? shape[0] : 1;

  std::vector<double> onehot(static_cast<std::size_t>(batch) * n_agents_, 0.0);
  for (int r = 0; r < batch; ++r) onehot[static_cast<std::size_t>(r) * n_agents_ + partner] = 1.0;
  Value oh = batched ? tape.constant({batch, n_agents_}, std::move(onehot))
                     : tape.constant({n_agents_}, std::move(onehot));

  Value input = diff::concat({source_action, source_obs, target_obs, oh});
  Value mu = net_.forward(tape, input);
  Value sq = diff::sum_last(diff::square(diff::sub(target_action, mu)));
  const double norm = -0.5 * act_dim_ * (diff::kLogTwoPi + 2.0 * std::log(sigma_));
  return diff::add_scalar(diff::scale(sq, -1.0 / (2.0 * (sigma_ * sigma_))), norm);
}

}  // namespace vmac::nets
