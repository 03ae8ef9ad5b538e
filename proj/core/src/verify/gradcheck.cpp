#include "vmac/verify/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace vmac::verify {

GradCheckResult finite_diff_check(std::span<diff::Tensor* const> params,
                                  const std::function<double()>& f, double h,
                                  double abs_floor, int stride) {
  if (stride < 1) throw std::invalid_argument("finite_diff_check: stride must be >= 1");
  GradCheckResult res;
  for (diff::Tensor* p : params) {
    if (!p->has_grad()) {
      throw std::invalid_argument("finite_diff_check: parameter lacks a gradient");
    }
    for (std::size_t k = 0; k < p->data.size(); k += static_cast<std::size_t>(stride)) {
      const double saved = p->data[k];
      p->data[k] = saved + h;
      const double fp = f();
      p->data[k] = saved - h;
      const double fm = f();
      p->data[k] = saved;
      const double fd = (fp - fm) / (2.0 * h);
      const double g = p->grad[k];
      const double abs_err = std::abs(fd - g);
      const double mag = std::max(std::abs(fd), std::abs(g));
      if (mag < abs_floor) {
        res.max_abs_err = std::max(res.max_abs_err, abs_err);
      } else {
        res.max_rel_err = std::max(res.max_rel_err, abs_err / mag);
      }
      ++res.checked;
    }
  }
  return res;
}

}  // namespace vmac::verify
