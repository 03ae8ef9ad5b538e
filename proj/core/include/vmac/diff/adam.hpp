#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vmac/diff/tensor.hpp"

namespace vmac::diff {

// Adam with bias correction. One state covers an ordered list of parameters;
// moment buffers are laid out per parameter and sized on first use.
struct AdamState {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// Applies one Adam update in place and clears the gradients. Every parameter
// must carry a populated gradient; a missing one is rejected.
void adam_step(std::span<Tensor* const> params, AdamState& state);
void adam_step(const std::vector<Tensor*>& params, AdamState& state);

}  // namespace vmac::diff
