#pragma once

#include <span>
#include <string>
#include <vector>

#include "vmac/diff/tape.hpp"
#include "vmac/rng.hpp"

namespace vmac::nets {

struct MlpSpec {
  int input_dim = 0;
  int output_dim = 0;
  std::vector<int> hidden = {128, 128};
  bool final_tanh = false;  // hidden activations are always ReLU
};

struct Linear {
  diff::Tensor w;  // [in, out]
  diff::Tensor b;  // [out]
};

// Plain fully connected network over the shared tape kernels. The raw
// (no-tape) forward paths reuse the exact same arithmetic as the taped one,
// so both produce bit-identical outputs.
class Mlp {
 public:
  Mlp() = default;
  Mlp(MlpSpec spec, Rng& rng);

  diff::Value forward(diff::Tape& tape, const diff::Value& x);

  void forward_raw(std::span<const double> x, std::span<double> out) const;
  std::vector<double> forward_raw(std::span<const double> x) const;
  // x is [batch, input_dim] row-major; out is [batch, output_dim].
  void forward_raw_batch(const double* x, int batch, double* out) const;

  std::vector<diff::Tensor*> params();
  std::vector<std::pair<std::string, diff::Tensor*>> named_params(const std::string& prefix);

  void copy_params_from(const Mlp& other);
  // this <- (1 - tau) * this + tau * other, per coordinate
  void soft_update_from(const Mlp& other, double tau);

  const MlpSpec& spec() const { return spec_; }

 private:
  MlpSpec spec_;
  std::vector<Linear> layers_;
  mutable std::vector<double> scratch_a_, scratch_b_;
};

}  // namespace vmac::nets
