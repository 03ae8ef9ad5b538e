#include "vmac/diff/tape.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "vmac/diff/kernels.hpp"

namespace vmac::diff {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void require(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

enum class BroadcastKind { same, rhs_scalar, lhs_scalar, rhs_trailing };

// Decides how b is applied against a for elementwise binary ops.
BroadcastKind broadcast_kind(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return BroadcastKind::same;
  if (b.empty()) return BroadcastKind::rhs_scalar;
  if (a.empty()) return BroadcastKind::lhs_scalar;
  if (a.size() == b.size() + 1 &&
      std::equal(b.begin(), b.end(), a.begin() + 1)) {
    return BroadcastKind::rhs_trailing;
  }
  fail(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

}  // namespace

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape s, std::vector<double> values, bool rg)
    : shape(std::move(s)), data(std::move(values)), requires_grad(rg) {
  for (int d : shape) {
    if (d < 0) fail("Tensor: negative dimension in " + shape_str(shape));
  }
  if (numel(shape) != static_cast<std::int64_t>(data.size())) {
    fail("Tensor: shape " + shape_str(shape) + " does not match data length " +
         std::to_string(data.size()));
  }
  if (requires_grad) grad.assign(data.size(), 0.0);
}

Tensor Tensor::zeros(Shape s, bool rg) {
  auto n = numel(s);
  return Tensor(std::move(s), std::vector<double>(static_cast<std::size_t>(n), 0.0), rg);
}

Tensor Tensor::full(Shape s, double value, bool rg) {
  auto n = numel(s);
  return Tensor(std::move(s), std::vector<double>(static_cast<std::size_t>(n), value), rg);
}

Tensor Tensor::scalar(double value, bool rg) { return Tensor({}, {value}, rg); }

void Tensor::set_requires_grad(bool rg) {
  requires_grad = rg;
  if (rg) {
    grad.assign(data.size(), 0.0);
  } else {
    grad.clear();
  }
}

void Tensor::zero_grad() {
  if (requires_grad) grad.assign(data.size(), 0.0);
}

void Tensor::check_finite(const char* what) const {
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw std::runtime_error(std::string("non-finite value in ") + what);
    }
  }
}

// ---- Value ------------------------------------------------------------------

const Shape& Value::shape() const { return tape_->node(id_).shape; }
const std::vector<double>& Value::data() const { return tape_->node(id_).data; }
const std::vector<double>& Value::grad() const { return tape_->node(id_).grad; }

double Value::item() const {
  const auto& n = tape_->node(id_);
  if (!n.shape.empty()) fail("item(): node is not a scalar, shape " + shape_str(n.shape));
  return n.data[0];
}

// ---- Tape -------------------------------------------------------------------

Value Tape::push(Shape shape, std::vector<double> data, bool needs_grad,
                 std::function<void(Tape&)> pull, Tensor* source) {
  if (consumed_) fail("tape already consumed by backward()");
  Node n;
  n.shape = std::move(shape);
  n.data = std::move(data);
  n.needs_grad = needs_grad;
  n.source = source;
  n.pull = std::move(pull);
  nodes_.push_back(std::move(n));
  return Value(this, static_cast<int>(nodes_.size()) - 1);
}

Value Tape::leaf(Tensor& param) {
  return push(param.shape, param.data, param.requires_grad, nullptr,
              param.requires_grad ? &param : nullptr);
}

Value Tape::constant(const Tensor& t) { return push(t.shape, t.data, false, nullptr); }

Value Tape::constant(Shape shape, std::vector<double> values) {
  if (numel(shape) != static_cast<std::int64_t>(values.size())) {
    fail("constant: shape " + shape_str(shape) + " does not match data length " +
         std::to_string(values.size()));
  }
  return push(std::move(shape), std::move(values), false, nullptr);
}

Value Tape::scalar(double v) { return push({}, {v}, false, nullptr); }

void Tape::backward(const Value& loss) {
  if (loss.tape() != this) fail("backward: value does not belong to this tape");
  if (consumed_) fail("backward: tape already consumed");
  const Node& ln = node(loss.id());
  if (!ln.shape.empty()) {
    fail("backward: loss must be a scalar, got shape " + shape_str(ln.shape));
  }
  consumed_ = true;
  for (auto& n : nodes_) {
    if (n.needs_grad) n.grad.assign(n.data.size(), 0.0);
  }
  if (!node(loss.id()).needs_grad) return;  // loss independent of any parameter
  node(loss.id()).grad[0] = 1.0;
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = node(i);
    if (n.needs_grad && n.pull) n.pull(*this);
  }
  for (auto& n : nodes_) {
    if (n.source != nullptr && n.needs_grad) {
      auto& g = n.source->grad;
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
    }
  }
}

// ---- op helpers ---------------------------------------------------------------

namespace {

Tape& tape_of(const Value& a) {
  require(a.defined(), "op called on an undefined value");
  return *a.tape();
}

Tape& same_tape(const Value& a, const Value& b) {
  Tape& t = tape_of(a);
  require(b.defined() && b.tape() == &t, "operands live on different tapes");
  return t;
}

Value unary_op(const Value& a, const char* /*name*/, Shape out_shape,
               std::vector<double> out_data,
               const std::function<void(const std::vector<double>& dout,
                                        const Tape::Node& in, const Tape::Node& out,
                                        std::vector<double>& din)>& rule) {
  Tape& t = tape_of(a);
  const bool ng = t.node(a.id()).needs_grad;
  const int ain = a.id();
  Value out = t.push(std::move(out_shape), std::move(out_data), ng, nullptr);
  const int oid = out.id();
  if (ng) {
    t.node(oid).pull = [ain, oid, rule](Tape& tp) {
      rule(tp.node(oid).grad, tp.node(ain), tp.node(oid), tp.node(ain).grad);
    };
  }
  return out;
}

}  // namespace

// ---- elementwise binary -------------------------------------------------------

namespace {

Value binary_op(const Value& a, const Value& b, const char* name,
                double (*fwd)(double, double),
                // accumulate input grads for one element pair
                void (*bwd)(double x, double y, double g, double& gx, double& gy)) {
  Tape& t = same_tape(a, b);
  const auto& na = t.node(a.id());
  const auto& nb = t.node(b.id());
  const BroadcastKind kind = broadcast_kind(na.shape, nb.shape, name);

  Shape out_shape = (kind == BroadcastKind::lhs_scalar) ? nb.shape : na.shape;
  const std::size_t n = static_cast<std::size_t>(numel(out_shape));
  std::vector<double> out(n);
  const std::size_t bn = nb.data.size();
  switch (kind) {
    case BroadcastKind::same:
      for (std::size_t i = 0; i < n; ++i) out[i] = fwd(na.data[i], nb.data[i]);
      break;
    case BroadcastKind::rhs_scalar:
      for (std::size_t i = 0; i < n; ++i) out[i] = fwd(na.data[i], nb.data[0]);
      break;
    case BroadcastKind::lhs_scalar:
      for (std::size_t i = 0; i < n; ++i) out[i] = fwd(na.data[0], nb.data[i]);
      break;
    case BroadcastKind::rhs_trailing:
      for (std::size_t i = 0; i < n; ++i) out[i] = fwd(na.data[i], nb.data[i % bn]);
      break;
  }

  const bool ng = na.needs_grad || nb.needs_grad;
  const int ia = a.id(), ib = b.id();
  Value v = t.push(std::move(out_shape), std::move(out), ng, nullptr);
  const int io = v.id();
  if (ng) {
    t.node(io).pull = [ia, ib, io, kind, bwd](Tape& tp) {
      auto& xa = tp.node(ia);
      auto& xb = tp.node(ib);
      const auto& g = tp.node(io).grad;
      const std::size_t n = g.size();
      const std::size_t bn = xb.data.size();
      double dummy = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t ja = i, jb = i;
        if (kind == BroadcastKind::rhs_scalar) jb = 0;
        if (kind == BroadcastKind::lhs_scalar) ja = 0;
        if (kind == BroadcastKind::rhs_trailing) jb = i % bn;
        double& gx = xa.needs_grad ? xa.grad[ja] : dummy;
        double& gy = xb.needs_grad ? xb.grad[jb] : dummy;
        bwd(xa.data[ja], xb.data[jb], g[i], gx, gy);
      }
    };
  }
  return v;
}

}  // namespace

Value add(const Value& a, const Value& b) {
  return binary_op(a, b, "add",
                   [](double x, double y) { return x + y; },
                   [](double, double, double g, double& gx, double& gy) {
                     gx += g;
                     gy += g;
                   });
}

Value sub(const Value& a, const Value& b) {
  return binary_op(a, b, "sub",
                   [](double x, double y) { return x - y; },
                   [](double, double, double g, double& gx, double& gy) {
                     gx += g;
                     gy -= g;
                   });
}

Value mul(const Value& a, const Value& b) {
  return binary_op(a, b, "mul",
                   [](double x, double y) { return x * y; },
                   [](double x, double y, double g, double& gx, double& gy) {
                     gx += g * y;
                     gy += g * x;
                   });
}

Value minimum(const Value& a, const Value& b) {
  // ties route the gradient to the first operand
  return binary_op(a, b, "minimum",
                   [](double x, double y) { return x <= y ? x : y; },
                   [](double x, double y, double g, double& gx, double& gy) {
                     if (x <= y) {
                       gx += g;
                     } else {
                       gy += g;
                     }
                   });
}

// ---- elementwise unary ----------------------------------------------------------

Value relu(const Value& a) {
  Tape& t = tape_of(a);
  const auto& na = t.node(a.id());
  std::vector<double> out(na.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = na.data[i] > 0.0 ? na.data[i] : 0.0;
  return unary_op(a, "relu", na.shape, std::move(out),
                  [](const std::vector<double>& g, const Tape::Node& in,
                     const Tape::Node&, std::vector<double>& din) {
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      if (in.data[i] > 0.0) din[i] += g[i];
                    }
                  });
}

Value tanh(const Value& a) {
  Tape& t = tape_of(a);
  const auto& na = t.node(a.id());
  std::vector<double> out(na.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(na.data[i]);
  return unary_op(a, "tanh", na.shape, std::move(out),
                  [](const std::vector<double>& g, const Tape::Node&,
                     const Tape::Node& o, std::vector<double>& din) {
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      din[i] += g[i] * (1.0 - o.data[i] * o.data[i]);
                    }
                  });
}

Value exp(const Value& a) {
  Tape& t = tape_of(a);
  const auto& na = t.node(a.id());
  std::vector<double> out(na.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (na.data[i] > 709.0) fail("exp: argument overflows double range");
    out[i] = std::exp(na.data[i]);
  }
  return unary_op(a, "exp", na.shape, std::move(out),
                  [](const std::vector<double>& g, const Tape::Node&,
                     const Tape::Node& o, std::vector<double>& din) {
                    for (std::size_t i = 0; i < g.size(); ++i) din[i] += g[i] * o.data[i];
                  });
}

Value log(const Value& a) {
  Tape& t = tape_of(a);
  const auto& na = t.node(a.id());
  std::vector<double> out(na.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(na.data[i] > 0.0)) {
      throw std::domain_error("log: argument must be positive, got " +
                              std::to_string(na.data[i]));
    }
    out[i] = std::log(na.data[i]);
  }
  return unary_op(a, "log", na.shape, std::move(out),
                  [](const std::vector<double>& g, const Tape::Node& in,
                     const Tape::Node&, std::vector<double>& din) {
                    for (std::size_t i = 0; i < g.size(); ++i) din[i] += g[i] / in.data[i];
                  });
}

Value square(const Value& a) {
  Tape& t = tape_of(a);
  const auto& na = t.node(a.id());
  std::vector<double> out(na.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = na.data[i] * na.data[i];
  return unary_op(a, "square", na.shape, std::move(out),
                  [](const std::vector<double>& g, const Tape::Node& in,
                     const Tape::Node&, std::vector<double>& din) {
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      din[i] += 2.0 * g[i] * in.data[i];
                    }
                  });
}

Value neg(const Value& a) {
  Tape& t = tape_of(a);
  const auto& na = t.node(a.id());
  std::vector<double> out(na.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = -na.data[i];
  return unary_op(a, "neg", na.shape, std::move(out),
                  [](const std::vector<double>& g, const Tape::Node&,
                     const Tape::Node&, std::vector<double>& din) {
                    for (std::size_t i = 0; i < g.size(); ++i) din[i] -= g[i];
                  });
}

Value scale(const Value& a, double c) {
  Tape& t = tape_of(a);
  const auto& na = t.node(a.id());
  std::vector<double> out(na.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * na.data[i];
  return unary_op(a, "scale", na.shape, std::move(out),
                  [c](const std::vector<double>& g, const Tape::Node&,
                      const Tape::Node&, std::vector<double>& din) {
                    for (std::size_t i = 0; i < g.size(); ++i) din[i] += c * g[i];
                  });
}

Value add_scalar(const Value& a, double c) {
  Tape& t = tape_of(a);
  const auto& na = t.node(a.id());
  std::vector<double> out(na.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = na.data[i] + c;
  return unary_op(a, "add_scalar", na.shape, std::move(out),
                  [](const std::vector<double>& g, const Tape::Node&,
                     const Tape::Node&, std::vector<double>& din) {
                    for (std::size_t i = 0; i < g.size(); ++i) din[i] += g[i];
                  });
}

Value clamp(const Value& a, double lo, double hi) {
  require(lo <= hi, "clamp: lo must not exceed hi");
  Tape& t = tape_of(a);
  const auto& na = t.node(a.id());
  std::vector<double> out(na.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = na.data[i] < lo ? lo : (na.data[i] > hi ? hi : na.data[i]);
  }
  return unary_op(a, "clamp", na.shape, std::move(out),
                  [lo, hi](const std::vector<double>& g, const Tape::Node& in,
                           const Tape::Node&, std::vector<double>& din) {
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      if (in.data[i] > lo && in.data[i] < hi) din[i] += g[i];
                    }
                  });
}

Value stop_gradient(const Value& a) {
  Tape& t = tape_of(a);
  const auto& na = t.node(a.id());
  return t.push(na.shape, na.data, false, nullptr);
}

// ---- matmul ------------------------------------------------------------------

Value matmul(const Value& a, const Value& b) {
  Tape& t = same_tape(a, b);
  const auto& na = t.node(a.id());
  const auto& nb = t.node(b.id());
  require(nb.shape.size() == 2, "matmul: right operand must be rank 2, got " +
                                    shape_str(nb.shape));
  const bool vec = na.shape.size() == 1;
  require(vec || na.shape.size() == 2,
          "matmul: left operand must be rank 1 or 2, got " + shape_str(na.shape));
  const int m = vec ? 1 : na.shape[0];
  const int k = vec ? na.shape[0] : na.shape[1];
  const int n = nb.shape[1];
  if (nb.shape[0] != k) {
    fail("matmul: inner dimensions differ, " + shape_str(na.shape) + " vs " +
         shape_str(nb.shape));
  }
  std::vector<double> out(static_cast<std::size_t>(m) * n);
  kernels::matmul(na.data.data(), nb.data.data(), out.data(), m, k, n);

  Shape out_shape = vec ? Shape{n} : Shape{m, n};
  const bool ng = na.needs_grad || nb.needs_grad;
  const int ia = a.id(), ib = b.id();
  Value v = t.push(std::move(out_shape), std::move(out), ng, nullptr);
  const int io = v.id();
  if (ng) {
    t.node(io).pull = [ia, ib, io, m, k, n](Tape& tp) {
      auto& xa = tp.node(ia);
      auto& xb = tp.node(ib);
      const auto& g = tp.node(io).grad;
      if (xa.needs_grad) {
        kernels::matmul_grad_a(g.data(), xb.data.data(), xa.grad.data(), m, k, n);
      }
      if (xb.needs_grad) {
        kernels::matmul_grad_b(xa.data.data(), g.data(), xb.grad.data(), m, k, n);
      }
    };
  }
  return v;
}

// ---- concat / reductions -------------------------------------------------------

Value concat(const std::vector<Value>& parts) {
  require(!parts.empty(), "concat: no operands");
  Tape& t = tape_of(parts.front());
  const auto& first = t.node(parts.front().id());
  const std::size_t rank = first.shape.size();
  require(rank >= 1, "concat: operands must have rank >= 1");
  std::int64_t rows = 1;
  for (std::size_t d = 0; d + 1 < rank; ++d) rows *= first.shape[d];

  int total_last = 0;
  bool ng = false;
  std::vector<int> ids, widths;
  for (const auto& p : parts) {
    require(p.defined() && p.tape() == &t, "concat: operands live on different tapes");
    const auto& np = t.node(p.id());
    require(np.shape.size() == rank, "concat: rank mismatch");
    for (std::size_t d = 0; d + 1 < rank; ++d) {
      require(np.shape[d] == first.shape[d], "concat: leading dimensions differ");
    }
    total_last += np.shape[rank - 1];
    ng = ng || np.needs_grad;
    ids.push_back(p.id());
    widths.push_back(np.shape[rank - 1]);
  }

  Shape out_shape = first.shape;
  out_shape[rank - 1] = total_last;
  std::vector<double> out(static_cast<std::size_t>(rows) * total_last);
  for (std::int64_t r = 0; r < rows; ++r) {
    std::size_t off = static_cast<std::size_t>(r) * total_last;
    for (std::size_t pi = 0; pi < ids.size(); ++pi) {
      const auto& src = t.node(ids[pi]).data;
      const int w = widths[pi];
      for (int j = 0; j < w; ++j) out[off + j] = src[static_cast<std::size_t>(r) * w + j];
      off += static_cast<std::size_t>(w);
    }
  }

  Value v = t.push(std::move(out_shape), std::move(out), ng, nullptr);
  const int io = v.id();
  if (ng) {
    t.node(io).pull = [ids, widths, rows, total_last, io](Tape& tp) {
      const auto& g = tp.node(io).grad;
      for (std::int64_t r = 0; r < rows; ++r) {
        std::size_t off = static_cast<std::size_t>(r) * total_last;
        for (std::size_t pi = 0; pi < ids.size(); ++pi) {
          auto& np = tp.node(ids[pi]);
          const int w = widths[pi];
          if (np.needs_grad) {
            for (int j = 0; j < w; ++j) {
              np.grad[static_cast<std::size_t>(r) * w + j] += g[off + j];
            }
          }
          off += static_cast<std::size_t>(w);
        }
      }
    };
  }
  return v;
}

Value concat(const Value& a, const Value& b) { return concat(std::vector<Value>{a, b}); }

Value sum(const Value& a) {
  Tape& t = tape_of(a);
  const auto& na = t.node(a.id());
  double s = 0.0;
  for (double v : na.data) s += v;
  return unary_op(a, "sum", {}, {s},
                  [](const std::vector<double>& g, const Tape::Node&,
                     const Tape::Node&, std::vector<double>& din) {
                    for (double& d : din) d += g[0];
                  });
}

Value mean(const Value& a) {
  Tape& t = tape_of(a);
  const auto& na = t.node(a.id());
  require(!na.data.empty(), "mean: empty tensor");
  double s = 0.0;
  for (double v : na.data) s += v;
  const double inv = 1.0 / static_cast<double>(na.data.size());
  return unary_op(a, "mean", {}, {s * inv},
                  [inv](const std::vector<double>& g, const Tape::Node&,
                        const Tape::Node&, std::vector<double>& din) {
                    for (double& d : din) d += g[0] * inv;
                  });
}

Value sum_last(const Value& a) {
  Tape& t = tape_of(a);
  const auto& na = t.node(a.id());
  require(!na.shape.empty(), "sum_last: operand must have rank >= 1");
  const int last = na.shape.back();
  Shape out_shape(na.shape.begin(), na.shape.end() - 1);
  const std::size_t rows = static_cast<std::size_t>(numel(out_shape));
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int j = 0; j < last; ++j) s += na.data[r * last + j];
    out[r] = s;
  }
  return unary_op(a, "sum_last", std::move(out_shape), std::move(out),
                  [last](const std::vector<double>& g, const Tape::Node&,
                         const Tape::Node&, std::vector<double>& din) {
                    const std::size_t rows = g.size();
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (int j = 0; j < last; ++j) din[r * last + j] += g[r];
                    }
                  });
}

Value gaussian_log_prob(const Value& x, const Value& mu, const Value& log_std) {
  Tape& t = same_tape(x, mu);
  same_tape(x, log_std);
  const auto& nx = t.node(x.id());
  const auto& nm = t.node(mu.id());
  const auto& ns = t.node(log_std.id());
  if (nx.shape != nm.shape || nx.shape != ns.shape) {
    fail("gaussian_log_prob: shapes differ, x " + shape_str(nx.shape) + " mu " +
         shape_str(nm.shape) + " log_std " + shape_str(ns.shape));
  }
  require(!nx.shape.empty(), "gaussian_log_prob: operands must have rank >= 1");
  Value z = mul(sub(x, mu), exp(neg(log_std)));
  Value per_dim = add_scalar(neg(add(scale(square(z), 0.5), log_std)), -0.5 * kLogTwoPi);
  return sum_last(per_dim);
}

}  // namespace vmac::diff
