#include "vmac/nets/critic.hpp"

#include <stdexcept>

namespace vmac::nets {

CriticSet CriticSet::make(int x_dim, int a_dim, const std::vector<int>& hidden, Rng& rng) {
  CriticSet c;
  MlpSpec q_spec{x_dim + a_dim, 1, hidden, false};
  MlpSpec v_spec{x_dim, 1, hidden, false};
  c.q1 = Mlp(q_spec, rng);
  c.q2 = Mlp(q_spec, rng);
  c.v = Mlp(v_spec, rng);
  c.v_target = Mlp(v_spec, rng);
  c.v_target.copy_params_from(c.v);
  return c;
}

CriticSet::Eval CriticSet::eval_raw(std::span<const double> x, std::span<const double> a) const {
  const auto& spec = q1.spec();
  if (static_cast<int>(x.size() + a.size()) != spec.input_dim) {
    throw std::invalid_argument(
        "critic eval: got x+a of size " + std::to_string(x.size() + a.size()) +
        " but the critic expects " + std::to_string(spec.input_dim));
  }
  std::vector<double> input;
  input.reserve(x.size() + a.size());
  input.insert(input.end(), x.begin(), x.end());
  input.insert(input.end(), a.begin(), a.end());
  Eval e;
  double out = 0.0;
  q1.forward_raw_batch(input.data(), 1, &out);
  e.q1 = out;
  q2.forward_raw_batch(input.data(), 1, &out);
  e.q2 = out;
  e.q_min = e.q1 <= e.q2 ? e.q1 : e.q2;
  return e;
}

double CriticSet::v_raw(std::span<const double> x) const {
  double out = 0.0;
  if (static_cast<int>(x.size()) != v.spec().input_dim) {
    throw std::invalid_argument("critic v: input size mismatch");
  }
  v.forward_raw_batch(x.data(), 1, &out);
  return out;
}

double CriticSet::v_target_raw(std::span<const double> x) const {
  double out = 0.0;
  v_target.forward_raw_batch(x.data(), 1, &out);
  return out;
}

std::vector<std::pair<std::string, diff::Tensor*>> CriticSet::named_params(
    const std::string& prefix) {
  std::vector<std::pair<std::string, diff::Tensor*>> out;
  for (auto& p : q1.named_params(prefix + "/q1")) out.push_back(p);
  for (auto& p : q2.named_params(prefix + "/q2")) out.push_back(p);
  for (auto& p : v.named_params(prefix + "/v")) out.push_back(p);
  for (auto& p : v_target.named_params(prefix + "/v_target")) out.push_back(p);
  return out;
}

}  // namespace vmac::nets
