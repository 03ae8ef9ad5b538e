#include "vmac/nets/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "vmac/diff/kernels.hpp"

namespace vmac::nets {

using diff::Tensor;
using diff::Value;

namespace {

Tensor init_linear_weight(int in, int out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Tensor t = Tensor::zeros({in, out}, true);
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

Tensor init_linear_bias(int /*in*/, int out, Rng& /*rng*/) {
  // zero biases: a zero input propagates zeros, so fresh nets emit exactly
  // their final-layer bias
  return Tensor::zeros({out}, true);
}

}  // namespace

Mlp::Mlp(MlpSpec spec, Rng& rng) : spec_(std::move(spec)) {
  if (spec_.input_dim <= 0 || spec_.output_dim <= 0) {
    throw std::invalid_argument("Mlp: input and output dims must be positive");
  }
  int in = spec_.input_dim;
  for (int h : spec_.hidden) {
    if (h <= 0) throw std::invalid_argument("Mlp: hidden widths must be positive");
    layers_.push_back({init_linear_weight(in, h, rng), init_linear_bias(in, h, rng)});
    in = h;
  }
  layers_.push_back(
      {init_linear_weight(in, spec_.output_dim, rng), init_linear_bias(in, spec_.output_dim, rng)});
}

Value Mlp::forward(diff::Tape& tape, const Value& x) {
  Value h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = diff::add(diff::matmul(h, tape.leaf(layers_[i].w)), tape.leaf(layers_[i].b));
    if (i + 1 < layers_.size()) {
      h = diff::relu(h);
    } else if (spec_.final_tanh) {
      h = diff::tanh(h);
    }
  }
  return h;
}

void Mlp::forward_raw_batch(const double* x, int batch, double* out) const {
  const double* cur = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Linear& lin = layers_[i];
    const int in = lin.w.shape[0];
    const int width = lin.w.shape[1];
    auto& dst = (i % 2 == 0) ? scratch_a_ : scratch_b_;
    dst.resize(static_cast<std::size_t>(batch) * width);
    diff::kernels::matmul(cur, lin.w.data.data(), dst.data(), batch, in, width);
    for (int r = 0; r < batch; ++r) {
      double* row = dst.data() + static_cast<std::size_t>(r) * width;
      for (int j = 0; j < width; ++j) row[j] += lin.b.data[j];
    }
    if (i + 1 < layers_.size()) {
      for (double& v : dst) v = v > 0.0 ? v : 0.0;
    } else if (spec_.final_tanh) {
      for (double& v : dst) v = std::tanh(v);
    }
    cur = dst.data();
  }
  const std::size_t n = static_cast<std::size_t>(batch) * spec_.output_dim;
  for (std::size_t i = 0; i < n; ++i) out[i] = cur[i];
}

void Mlp::forward_raw(std::span<const double> x, std::span<double> out) const {
  if (static_cast<int>(x.size()) != spec_.input_dim) {
    throw std::invalid_argument("Mlp::forward_raw: expected input of size " +
                                std::to_string(spec_.input_dim) + ", got " +
                                std::to_string(x.size()));
  }
  forward_raw_batch(x.data(), 1, out.data());
}

std::vector<double> Mlp::forward_raw(std::span<const double> x) const {
  std::vector<double> out(static_cast<std::size_t>(spec_.output_dim));
  forward_raw(x, out);
  return out;
}

std::vector<Tensor*> Mlp::params() {
  std::vector<Tensor*> out;
  for (auto& l : layers_) {
    out.push_back(&l.w);
    out.push_back(&l.b);
  }
  return out;
}

std::vector<std::pair<std::string, Tensor*>> Mlp::named_params(const std::string& prefix) {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    out.emplace_back(prefix + "/l" + std::to_string(i) + "/w", &layers_[i].w);
    out.emplace_back(prefix + "/l" + std::to_string(i) + "/b", &layers_[i].b);
  }
  return out;
}

void Mlp::copy_params_from(const Mlp& other) {
  if (other.layers_.size() != layers_.size()) {
    throw std::invalid_argument("Mlp::copy_params_from: layer count mismatch");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].w.data = other.layers_[i].w.data;
    layers_[i].b.data = other.layers_[i].b.data;
  }
}

void Mlp::soft_update_from(const Mlp& other, double tau) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto blend = [tau](std::vector<double>& dst, const std::vector<double>& src) {
      for (std::size_t k = 0; k < dst.size(); ++k) {
        dst[k] = (1.0 - tau) * dst[k] + tau * src[k];
      }
    };
    blend(layers_[i].w.data, other.layers_[i].w.data);
    blend(layers_[i].b.data, other.layers_[i].b.data);
  }
}

}  // namespace vmac::nets
