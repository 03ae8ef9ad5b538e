#pragma once

#include <functional>
#include <span>
#include <vector>

#include "vmac/diff/tensor.hpp"

namespace vmac::verify {

struct GradCheckResult {
  double max_rel_err = 0.0;  // among coordinates with a meaningful magnitude
  double max_abs_err = 0.0;  // among near-zero coordinates
  std::size_t checked = 0;
  // true when every coordinate satisfies rel < rel_tol or, for near-zero
  // gradients, abs < abs_floor
  bool ok(double rel_tol, double abs_floor = 1e-6) const {
    return max_rel_err < rel_tol && max_abs_err < abs_floor;
  }
};

// Central finite differences against the gradients currently stored in the
// parameters. `f` re-evaluates the scalar function at the parameters' current
// values and must not touch their grad fields. Coordinates where both the
// analytic and numeric gradients are below `abs_floor` are compared
// absolutely instead of relatively.
GradCheckResult finite_diff_check(std::span<diff::Tensor* const> params,
                                  const std::function<double()>& f, double h = 1e-5,
                                  double abs_floor = 1e-6, int stride = 1);

}  // namespace vmac::verify
