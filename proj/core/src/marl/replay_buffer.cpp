#include "vmac/marl/replay_buffer.hpp"

#include <cmath>
#include <stdexcept>

namespace vmac::marl {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

namespace {

bool all_finite(const std::vector<std::vector<double>>& vecs) {
  for (const auto& v : vecs) {
    for (double x : v) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

}  // namespace

void ReplayBuffer::push(Transition t) {
  if (!std::isfinite(t.reward) || !all_finite(t.obs) || !all_finite(t.actions) ||
      !all_finite(t.next_obs)) {
    throw std::invalid_argument("ReplayBuffer::push: non-finite transition");
  }
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
    next_ = (next_ + 1) % capacity_;
  }
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, Rng& rng) const {
  if (items_.empty()) throw std::logic_error("ReplayBuffer: cannot sample from an empty buffer");
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(items_.size())));
  }
  return out;
}

}  // namespace vmac::marl
