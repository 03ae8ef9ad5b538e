#pragma once

#include <cstddef>
#include <vector>

#include "vmac/rng.hpp"

namespace vmac::marl {

// One stored environment step. `terminal` marks true termination and masks
// bootstrapping; horizon truncation is kept separately and bootstraps
// normally.
struct Transition {
  std::vector<std::vector<double>> obs;       // per agent
  std::vector<std::vector<double>> actions;   // per agent
  double reward = 0.0;
  std::vector<std::vector<double>> next_obs;  // per agent
  bool terminal = false;
  bool truncated = false;
};

// Fixed-capacity ring of transitions with a uniform, seeded sampler.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);  // rejects non-finite payloads
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return items_[i]; }

  // n independent uniform draws over the filled portion only.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

}  // namespace vmac::marl
