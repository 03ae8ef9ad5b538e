#pragma once

#include <functional>
#include <vector>

#include "vmac/diff/tensor.hpp"

namespace vmac::diff {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Value {
 public:
  Value() = default;
  const Shape& shape() const;
  const std::vector<double>& data() const;
  // Gradient of the last backward pass w.r.t. this node (empty if none).
  const std::vector<double>& grad() const;
  double item() const;  // scalar payload; throws if not rank 0
  bool defined() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

 private:
  friend class Tape;
  Value(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Define-by-run reverse-mode tape. Built fresh per loss evaluation; a single
// backward() consumes it. Operations record their backward rule whenever any
// input needs gradients.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Watches a parameter: after backward(), d(loss)/d(param) is accumulated
  // into param.grad. The tensor must outlive the tape.
  Value leaf(Tensor& param);
  Value constant(const Tensor& t);
  Value constant(Shape shape, std::vector<double> values);
  Value scalar(double v);

  // Seeds d(loss)/d(loss) = 1 and walks recorded ops in reverse order.
  // `loss` must be rank 0. A tape can only run backward once.
  void backward(const Value& loss);

  int node_count() const { return static_cast<int>(nodes_.size()); }
  bool consumed() const { return consumed_; }

  // --- internals shared with the op implementations ---
  struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool needs_grad = false;
    Tensor* source = nullptr;
    std::function<void(Tape&)> pull;  // backward rule; empty for leaves
  };
  Value push(Shape shape, std::vector<double> data, bool needs_grad,
             std::function<void(Tape&)> pull, Tensor* source = nullptr);
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

 private:
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// ---- operations -----------------------------------------------------------
// Binary elementwise ops accept operands of the same shape, a rank-0 operand
// on either side, or a right operand matching the left's trailing dims
// (broadcast over the leading batch axis).

Value matmul(const Value& a, const Value& b);
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value relu(const Value& a);
Value tanh(const Value& a);
Value exp(const Value& a);
Value log(const Value& a);
Value square(const Value& a);
Value neg(const Value& a);
Value scale(const Value& a, double c);
Value add_scalar(const Value& a, double c);
Value concat(const std::vector<Value>& parts);  // along the last axis
Value concat(const Value& a, const Value& b);
Value sum(const Value& a);       // all entries -> rank 0
Value mean(const Value& a);      // all entries -> rank 0; rejects empty
Value sum_last(const Value& a);  // reduces the last axis
Value minimum(const Value& a, const Value& b);
Value clamp(const Value& a, double lo, double hi);
// Identity forward, zero backward.
Value stop_gradient(const Value& a);
// Sum over the last axis of the elementwise diagonal Gaussian log-density:
// sum_k [ -log_std_k - log(2*pi)/2 - ((x_k-mu_k)/exp(log_std_k))^2 / 2 ].
Value gaussian_log_prob(const Value& x, const Value& mu, const Value& log_std);

inline Value operator+(const Value& a, const Value& b) { return add(a, b); }
inline Value operator-(const Value& a, const Value& b) { return sub(a, b); }
inline Value operator*(const Value& a, const Value& b) { return mul(a, b); }
inline Value operator*(double c, const Value& a) { return scale(a, c); }
inline Value operator-(const Value& a) { return neg(a); }

constexpr double kLogTwoPi = 1.8378770664093454836;

}  // namespace vmac::diff
