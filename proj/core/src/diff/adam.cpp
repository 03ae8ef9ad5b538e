#include "vmac/diff/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace vmac::diff {

void adam_step(std::span<Tensor* const> params, AdamState& state) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i]->data.size(), 0.0);
      state.v[i].assign(params[i]->data.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter list size changed");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->has_grad()) {
      throw std::invalid_argument("adam_step: parameter " + std::to_string(i) +
                                  " has no gradient");
    }
    if (state.m[i].size() != params[i]->data.size()) {
      throw std::invalid_argument("adam_step: parameter " + std::to_string(i) +
                                  " changed size");
    }
  }

  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < p.data.size(); ++k) {
      const double g = p.grad[k];
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p.data[k] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
    p.zero_grad();
  }
}

void adam_step(const std::vector<Tensor*>& params, AdamState& state) {
  adam_step(std::span<Tensor* const>(params.data(), params.size()), state);
}

}  // namespace vmac::diff
