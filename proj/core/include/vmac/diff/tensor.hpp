#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vmac::diff {

// Row-major dense shape. Rank 0 (empty shape) is a scalar holding one value.
using Shape = std::vector<int>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense 64-bit float tensor. Parameters set requires_grad; gradients
// accumulate across backward passes until zero_grad().
struct Tensor {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // sized like data iff requires_grad

  Tensor() = default;
  Tensor(Shape s, std::vector<double> values, bool rg = false);

  static Tensor zeros(Shape s, bool rg = false);
  static Tensor full(Shape s, double value, bool rg = false);
  static Tensor scalar(double value, bool rg = false);

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  void set_requires_grad(bool rg);
  void zero_grad();
  bool has_grad() const { return requires_grad && grad.size() == data.size(); }
  // Throws std::runtime_error naming `what` if any entry is NaN/Inf.
  void check_finite(const char* what) const;
};

}  // namespace vmac::diff
