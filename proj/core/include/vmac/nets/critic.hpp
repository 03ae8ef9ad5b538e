#pragma once

#include <span>
#include <string>
#include <vector>

#include "vmac/nets/mlp.hpp"

namespace vmac::nets {

// Twin action-value critics plus a state-value network and its slowly
// tracking target copy. q1 and q2 are independently initialized.
struct CriticSet {
  Mlp q1;        // (x ++ a_all) -> 1
  Mlp q2;        // (x ++ a_all) -> 1
  Mlp v;         // x -> 1
  Mlp v_target;  // EMA copy of v

  static CriticSet make(int x_dim, int a_dim, const std::vector<int>& hidden, Rng& rng);

  struct Eval {
    double q1 = 0.0;
    double q2 = 0.0;
    double q_min = 0.0;
  };
  Eval eval_raw(std::span<const double> x, std::span<const double> a) const;

  double v_raw(std::span<const double> x) const;
  double v_target_raw(std::span<const double> x) const;

  // v_target <- (1 - tau) * v_target + tau * v
  void soft_update(double tau) { v_target.soft_update_from(v, tau); }

  std::vector<std::pair<std::string, diff::Tensor*>> named_params(const std::string& prefix);
};

}  // namespace vmac::nets
