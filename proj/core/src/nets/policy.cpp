#include "vmac/nets/policy.hpp"

#include <cmath>
#include <stdexcept>

#include "vmac/diff/kernels.hpp"

namespace vmac::nets {

using diff::Tensor;
using diff::Value;

namespace {

Tensor uniform_tensor(diff::Shape shape, double bound, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

GaussianPolicy::GaussianPolicy(int obs_dim, int act_dim, int latent_dim,
                               const std::vector<int>& hidden, Rng& rng)
    : obs_dim_(obs_dim), act_dim_(act_dim), latent_dim_(latent_dim) {
  if (obs_dim <= 0 || act_dim <= 0 || latent_dim < 0) {
    throw std::invalid_argument("GaussianPolicy: bad dimensions");
  }
  if (hidden.empty()) throw std::invalid_argument("GaussianPolicy: needs hidden layers");
  int in = obs_dim + latent_dim;
  for (int h : hidden) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    trunk_w_.push_back(uniform_tensor({in, h}, bound, rng));
    trunk_b_.push_back(diff::Tensor::zeros({h}, true));
    in = h;
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  mu_w_ = uniform_tensor({in, act_dim}, bound, rng);
  mu_b_ = diff::Tensor::zeros({act_dim}, true);
  ls_w_ = uniform_tensor({in, act_dim}, bound, rng);
  ls_b_ = diff::Tensor::zeros({act_dim}, true);
}

void GaussianPolicy::check_dims(std::size_t obs, std::size_t z, std::size_t eps) const {
  if (static_cast<int>(obs) != obs_dim_) {
    throw std::invalid_argument("policy: observation size " + std::to_string(obs) +
                                " does not match obs_dim " + std::to_string(obs_dim_));
  }
  if (static_cast<int>(z) != latent_dim_) {
    throw std::invalid_argument("policy: latent size " + std::to_string(z) +
                                " does not match latent_dim " + std::to_string(latent_dim_));
  }
  if (static_cast<int>(eps) != act_dim_) {
    throw std::invalid_argument("policy: noise size " + std::to_string(eps) +
                                " does not match act_dim " + std::to_string(act_dim_));
  }
}

void GaussianPolicy::heads_raw_batch(const double* input, int batch, double* mu,
                                     double* log_std) const {
  thread_local std::vector<double> buf_a, buf_b;
  const double* cur = input;
  int in = obs_dim_ + latent_dim_;
  for (std::size_t i = 0; i < trunk_w_.size(); ++i) {
    const int width = trunk_w_[i].shape[1];
    auto& dst = (i % 2 == 0) ? buf_a : buf_b;
    dst.resize(static_cast<std::size_t>(batch) * width);
    diff::kernels::matmul(cur, trunk_w_[i].data.data(), dst.data(), batch, in, width);
    for (int r = 0; r < batch; ++r) {
      double* row = dst.data() + static_cast<std::size_t>(r) * width;
      for (int j = 0; j < width; ++j) {
        row[j] += trunk_b_[i].data[j];
        row[j] = row[j] > 0.0 ? row[j] : 0.0;
      }
    }
    cur = dst.data();
    in = width;
  }
  diff::kernels::matmul(cur, mu_w_.data.data(), mu, batch, in, act_dim_);
  diff::kernels::matmul(cur, ls_w_.data.data(), log_std, batch, in, act_dim_);
  for (int r = 0; r < batch; ++r) {
    for (int j = 0; j < act_dim_; ++j) {
      const std::size_t k = static_cast<std::size_t>(r) * act_dim_ + j;
      mu[k] += mu_b_.data[j];
      double ls = log_std[k] + ls_b_.data[j];
      log_std[k] = ls < kLogStdMin ? kLogStdMin : (ls > kLogStdMax ? kLogStdMax : ls);
    }
  }
}

void GaussianPolicy::sample_raw_batch(const double* obs, const double* z, const double* eps,
                                      int batch, double* actions_out,
                                      double* log_probs_out) const {
  const int in = obs_dim_ + latent_dim_;
  std::vector<double> input(static_cast<std::size_t>(batch) * in);
  for (int r = 0; r < batch; ++r) {
    double* row = input.data() + static_cast<std::size_t>(r) * in;
    for (int j = 0; j < obs_dim_; ++j) row[j] = obs[static_cast<std::size_t>(r) * obs_dim_ + j];
    for (int j = 0; j < latent_dim_; ++j) {
      row[obs_dim_ + j] = z[static_cast<std::size_t>(r) * latent_dim_ + j];
    }
  }
  std::vector<double> mu(static_cast<std::size_t>(batch) * act_dim_);
  std::vector<double> ls(static_cast<std::size_t>(batch) * act_dim_);
  heads_raw_batch(input.data(), batch, mu.data(), ls.data());

  // mirrors the taped graph op for op so both paths agree bitwise
  for (int r = 0; r < batch; ++r) {
    double gauss = 0.0, corr = 0.0;
    for (int j = 0; j < act_dim_; ++j) {
      const std::size_t k = static_cast<std::size_t>(r) * act_dim_ + j;
      const double u = mu[k] + std::exp(ls[k]) * eps[k];
      const double a = std::tanh(u);
      const double zscore = (u - mu[k]) * std::exp(-ls[k]);
      gauss += (-(0.5 * (zscore * zscore) + ls[k])) + (-0.5 * diff::kLogTwoPi);
      corr += std::log((-(a * a)) + (1.0 + kSquashEps));
      actions_out[k] = a;
    }
    log_probs_out[r] = gauss - corr;
  }
}

PolicySample GaussianPolicy::sample_raw(std::span<const double> obs, std::span<const double> z,
                                        std::span<const double> eps) const {
  check_dims(obs.size(), z.size(), eps.size());
  PolicySample s;
  s.action.resize(static_cast<std::size_t>(act_dim_));
  s.pre_tanh.resize(static_cast<std::size_t>(act_dim_));
  sample_raw_batch(obs.data(), z.data(), eps.data(), 1, s.action.data(), &s.log_prob);
  // recover pre-tanh for diagnostics
  const int in = obs_dim_ + latent_dim_;
  std::vector<double> input(static_cast<std::size_t>(in));
  for (int j = 0; j < obs_dim_; ++j) input[j] = obs[j];
  for (int j = 0; j < latent_dim_; ++j) input[obs_dim_ + j] = z[j];
  std::vector<double> mu(static_cast<std::size_t>(act_dim_));
  std::vector<double> ls(static_cast<std::size_t>(act_dim_));
  heads_raw_batch(input.data(), 1, mu.data(), ls.data());
  for (int j = 0; j < act_dim_; ++j) s.pre_tanh[j] = mu[j] + std::exp(ls[j]) * eps[j];
  return s;
}

std::vector<double> GaussianPolicy::mean_action_raw(std::span<const double> obs,
                                                    std::span<const double> z) const {
  std::vector<double> zero(static_cast<std::size_t>(act_dim_), 0.0);
  PolicySample s = sample_raw(obs, z, zero);
  return s.action;
}

GaussianPolicy::TapedSample GaussianPolicy::sample(diff::Tape& tape, const Value& obs,
                                                   const Value& z, const Value& eps) {
  const auto& oshape = obs.shape();
  const bool batched = oshape.size() == 2;
  if (!batched && oshape.size() != 1) {
    throw std::invalid_argument("policy sample: obs must be rank 1 or 2");
  }
  const int odim = oshape.back();
  const int zdim = z.shape().empty() ? 0 : z.shape().back();
  const int edim = eps.shape().back();
  check_dims(static_cast<std::size_t>(odim), static_cast<std::size_t>(zdim),
             static_cast<std::size_t>(edim));

  Value h = latent_dim_ > 0 ? diff::concat(obs, z) : obs;
  for (std::size_t i = 0; i < trunk_w_.size(); ++i) {
    h = diff::relu(diff::add(diff::matmul(h, tape.leaf(trunk_w_[i])), tape.leaf(trunk_b_[i])));
  }
  Value mu = diff::add(diff::matmul(h, tape.leaf(mu_w_)), tape.leaf(mu_b_));
  Value log_std = diff::clamp(diff::add(diff::matmul(h, tape.leaf(ls_w_)), tape.leaf(ls_b_)),
                              kLogStdMin, kLogStdMax);
  Value u = diff::add(mu, diff::mul(diff::exp(log_std), eps));
  Value action = diff::tanh(u);
  Value gauss = diff::gaussian_log_prob(u, mu, log_std);
  Value corr = diff::sum_last(
      diff::log(diff::add_scalar(diff::neg(diff::square(action)), 1.0 + kSquashEps)));
  return {action, diff::sub(gauss, corr)};
}

std::vector<Tensor*> GaussianPolicy::params() {
  std::vector<Tensor*> out;
  for (std::size_t i = 0; i < trunk_w_.size(); ++i) {
    out.push_back(&trunk_w_[i]);
    out.push_back(&trunk_b_[i]);
  }
  out.push_back(&mu_w_);
  out.push_back(&mu_b_);
  out.push_back(&ls_w_);
  out.push_back(&ls_b_);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> GaussianPolicy::named_params(
    const std::string& prefix) {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t i = 0; i < trunk_w_.size(); ++i) {
    out.emplace_back(prefix + "/trunk" + std::to_string(i) + "/w", &trunk_w_[i]);
    out.emplace_back(prefix + "/trunk" + std::to_string(i) + "/b", &trunk_b_[i]);
  }
  out.emplace_back(prefix + "/mu/w", &mu_w_);
  out.emplace_back(prefix + "/mu/b", &mu_b_);
  out.emplace_back(prefix + "/log_std/w", &ls_w_);
  out.emplace_back(prefix + "/log_std/b", &ls_b_);
  return out;
}

void GaussianPolicy::copy_params_from(const GaussianPolicy& other) {
  auto dst = params();
  auto src = const_cast<GaussianPolicy&>(other).params();
  if (dst.size() != src.size()) {
    throw std::invalid_argument("policy copy: parameter count mismatch");
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i]->data = src[i]->data;
}

void GaussianPolicy::soft_update_from(const GaussianPolicy& other, double tau) {
  auto dst = params();
  auto src = const_cast<GaussianPolicy&>(other).params();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    for (std::size_t k = 0; k < dst[i]->data.size(); ++k) {
      dst[i]->data[k] = (1.0 - tau) * dst[i]->data[k] + tau * src[i]->data[k];
    }
  }
}

}  // namespace vmac::nets
