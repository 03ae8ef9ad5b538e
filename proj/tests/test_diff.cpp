#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "vmac/diff/adam.hpp"
#include "vmac/diff/checkpoint.hpp"
#include "vmac/diff/tape.hpp"
#include "vmac/rng.hpp"
#include "vmac/verify/gradcheck.hpp"

using namespace vmac;
using diff::Tape;
using diff::Tensor;
using diff::Value;

TEST_SUITE_BEGIN("diffcore");

TEST_CASE("identity matmul returns the operand") {
  Rng rng(1);
  Tape tape;
  std::vector<double> a_data(4);
  for (double& v : a_data) v = rng.uniform(-2.0, 2.0);
  Value eye = tape.constant({2, 2}, {1.0, 0.0, 0.0, 1.0});
  Value a = tape.constant({2, 2}, a_data);
  Value out = diff::matmul(eye, a);
  for (int k = 0; k < 4; ++k) CHECK(out.data()[k] == a_data[k]);
}

TEST_CASE("elementwise analytic values") {
  Tape tape;
  CHECK(diff::tanh(tape.constant({1}, {0.0})).data()[0] == 0.0);
  CHECK(diff::relu(tape.constant({1}, {-1.5})).data()[0] == 0.0);
  CHECK(diff::mean(tape.constant({4}, {1.0, 2.0, 3.0, 4.0})).item() == 2.5);
}

TEST_CASE("shape mismatches are rejected with a message") {
  Tape tape;
  Value a = tape.constant({2, 3}, std::vector<double>(6, 1.0));
  Value b = tape.constant({4, 2}, std::vector<double>(8, 1.0));
  CHECK_THROWS_AS(diff::matmul(a, b), std::invalid_argument);
  CHECK_THROWS_AS(diff::add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(diff::log(tape.constant({1}, {0.0})), std::domain_error);
  CHECK_THROWS_AS(diff::log(tape.constant({1}, {-2.0})), std::domain_error);
}

TEST_CASE("backward of x squared at 3 gives 6") {
  Tensor x = Tensor::scalar(3.0, true);
  Tape tape;
  Value loss = diff::square(tape.leaf(x));
  tape.backward(loss);
  CHECK(x.grad[0] == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("backward rejects non-scalar losses and double use") {
  Tensor x({2}, {1.0, 2.0}, true);
  Tape tape;
  Value v = diff::square(tape.leaf(x));
  CHECK_THROWS_AS(tape.backward(v), std::invalid_argument);
  Value s = diff::sum(v);
  tape.backward(s);
  CHECK_THROWS_AS(tape.backward(s), std::invalid_argument);
}

TEST_CASE("loss independent of a parameter leaves zero grad") {
  Tensor used = Tensor::scalar(1.0, true);
  Tensor unused = Tensor::scalar(5.0, true);
  Tape tape;
  Value loss = diff::square(tape.leaf(used));
  (void)tape.leaf(unused);
  tape.backward(loss);
  CHECK(unused.grad[0] == 0.0);
}

TEST_CASE("sum of tanh of a linear map matches finite differences") {
  Rng rng(7);
  Tensor w = Tensor::zeros({3, 5}, true);
  for (double& v : w.data) v = rng.uniform(-1.0, 1.0);
  Tensor x = Tensor::zeros({3}, true);
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);

  auto build = [&](Tape& t) { return diff::sum(diff::tanh(diff::matmul(t.leaf(x), t.leaf(w)))); };
  Tape tape;
  Value loss = build(tape);
  tape.backward(loss);
  std::vector<Tensor*> params = {&w, &x};
  auto res = verify::finite_diff_check(params, [&]() {
    Tape t;
    return build(t).item();
  });
  CHECK(res.max_rel_err < 1e-4);
  CHECK(res.max_abs_err < 1e-6);
}

TEST_CASE("finite differences across every op kind") {
  Rng rng(11);
  Tensor w = Tensor::zeros({4, 3}, true);
  for (double& v : w.data) v = rng.uniform(0.2, 1.0);
  Tensor b = Tensor::zeros({3}, true);
  for (double& v : b.data) v = rng.uniform(0.2, 0.8);
  Tensor x = Tensor::zeros({2, 4}, true);
  for (double& v : x.data) v = rng.uniform(0.3, 1.2);

  auto build = [&](Tape& t) {
    Value h = diff::add(diff::matmul(t.leaf(x), t.leaf(w)), t.leaf(b));  // stays > 0
    Value parts = diff::concat({diff::tanh(h), diff::relu(h), diff::exp(diff::scale(h, 0.3)),
                                diff::log(h), diff::square(h), diff::neg(h),
                                diff::mul(h, h), diff::sub(h, diff::scale(h, 0.25)),
                                diff::minimum(h, diff::add_scalar(h, -0.1)),
                                diff::clamp(h, -5.0, 50.0)});
    Value rows = diff::sum_last(parts);
    Value g = diff::gaussian_log_prob(h, diff::scale(h, 0.5), diff::scale(h, 0.05));
    return diff::add(diff::add(diff::mean(parts), diff::sum(rows)),
                     diff::scale(diff::sum(g), 0.02));
  };
  Tape tape;
  Value loss = build(tape);
  tape.backward(loss);
  std::vector<Tensor*> params = {&w, &b, &x};
  auto res = verify::finite_diff_check(params, [&]() {
    Tape t;
    return build(t).item();
  });
  CHECK(res.max_rel_err < 1e-4);
  CHECK(res.max_abs_err < 1e-6);
}

TEST_CASE("stop_gradient blocks the backward path") {
  Tensor x = Tensor::scalar(2.0, true);
  Tape tape;
  Value through = diff::square(tape.leaf(x));
  Value blocked = diff::stop_gradient(through);
  CHECK(blocked.data()[0] == 4.0);
  Value loss = diff::add(diff::scale(blocked, 3.0), diff::square(tape.leaf(x)));
  tape.backward(loss);
  CHECK(x.grad[0] == doctest::Approx(4.0).epsilon(1e-15));  // only the live branch
}

TEST_CASE("broadcast add over the leading batch axis") {
  Tape tape;
  Value m = tape.constant({2, 3}, {1, 2, 3, 4, 5, 6});
  Value row = tape.constant({3}, {10, 20, 30});
  Value out = diff::add(m, row);
  CHECK(out.data() == std::vector<double>{11, 22, 33, 14, 25, 36});
  Value s = diff::add(m, tape.scalar(1.0));
  CHECK(s.data()[5] == 7.0);
  CHECK_THROWS_AS(diff::mean(tape.constant({0}, {})), std::invalid_argument);
}

TEST_CASE("broadcast backward reduces over the batch axis") {
  Tensor row({3}, {1.0, 2.0, 3.0}, true);
  Tape tape;
  Value m = tape.constant({2, 3}, {1, 2, 3, 4, 5, 6});
  Value loss = diff::sum(diff::mul(m, tape.leaf(row)));
  tape.backward(loss);
  CHECK(row.grad == std::vector<double>{5.0, 7.0, 9.0});
}

TEST_CASE("gaussian log density analytic points") {
  Tape tape;
  // x = mu, d = 1, std = 1
  Value lp = diff::gaussian_log_prob(tape.constant({1}, {0.7}), tape.constant({1}, {0.7}),
                                     tape.constant({1}, {0.0}));
  CHECK(lp.item() == doctest::Approx(-0.9189385332046727).epsilon(1e-12));
  // x = mu + 1
  Value lp2 = diff::gaussian_log_prob(tape.constant({1}, {1.7}), tape.constant({1}, {0.7}),
                                      tape.constant({1}, {0.0}));
  CHECK(lp2.item() == doctest::Approx(-1.4189385332046727).epsilon(1e-12));
}

TEST_CASE("gaussian log density gradient wrt mu matches finite differences") {
  Rng rng(23);
  Tensor x = Tensor::zeros({3}, false);
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
  Tensor mu = Tensor::zeros({3}, true);
  for (double& v : mu.data) v = rng.uniform(-1.0, 1.0);
  Tensor ls = Tensor::zeros({3}, true);
  for (double& v : ls.data) v = rng.uniform(-0.5, 0.5);

  auto build = [&](Tape& t) {
    return diff::gaussian_log_prob(t.constant(x), t.leaf(mu), t.leaf(ls));
  };
  Tape tape;
  Value loss = build(tape);
  tape.backward(loss);
  std::vector<Tensor*> params = {&mu, &ls};
  auto res = verify::finite_diff_check(params, [&]() {
    Tape t;
    return build(t).item();
  });
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("gaussian density integrates to one in 1d") {
  const double mu = 0.3, log_std = -0.4;
  const double std = std::exp(log_std);
  const int n = 20000;
  const double lo = mu - 10.0 * std, hi = mu + 10.0 * std;
  const double h = (hi - lo) / n;
  double integral = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + h * i;
    Tape tape;
    const double lp = diff::gaussian_log_prob(tape.constant({1}, {x}), tape.constant({1}, {mu}),
                                              tape.constant({1}, {log_std}))
                          .item();
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    integral += w * std::exp(lp) * h;
  }
  CHECK(std::abs(integral - 1.0) < 1e-3);
}

TEST_CASE("tape replay is bit-deterministic") {
  Rng rng(31);
  Tensor w = Tensor::zeros({4, 4}, true);
  for (double& v : w.data) v = rng.uniform(-1.0, 1.0);
  Tensor x = Tensor::zeros({4}, false);
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);

  auto run = [&]() {
    w.zero_grad();
    Tape tape;
    Value loss = diff::mean(diff::tanh(diff::matmul(tape.leaf(x), tape.leaf(w))));
    const double value = loss.item();
    tape.backward(loss);
    return std::make_pair(value, w.grad);
  };
  auto [v1, g1] = run();
  auto [v2, g2] = run();
  CHECK(v1 == v2);
  CHECK(g1 == g2);
}

TEST_CASE("adam zero gradient leaves parameters untouched") {
  Tensor p({3}, {1.0, -2.0, 3.0}, true);
  diff::AdamState st;
  std::vector<Tensor*> params = {&p};
  diff::adam_step(params, st);
  CHECK(p.data == std::vector<double>{1.0, -2.0, 3.0});
  CHECK(st.t == 1);
}

TEST_CASE("adam first step moves by lr in the gradient's direction") {
  Tensor p = Tensor::scalar(0.5, true);
  p.grad[0] = 1.0;
  diff::AdamState st;
  st.lr = 0.01;
  std::vector<Tensor*> params = {&p};
  diff::adam_step(params, st);
  CHECK(p.data[0] == doctest::Approx(0.5 - 0.01).epsilon(1e-6));
  CHECK(p.grad[0] == 0.0);  // cleared

  CHECK_THROWS_AS([&] {
    Tensor no_grad = Tensor::scalar(1.0, false);
    diff::AdamState s2;
    std::vector<Tensor*> ps = {&no_grad};
    diff::adam_step(ps, s2);
  }(), std::invalid_argument);
}

TEST_CASE("adam drives a quadratic toward zero, cross-checked by an oracle") {
  // independent plain-loop oracle
  double ox = 1.0, om = 0.0, ov = 0.0;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int t = 1; t <= 100; ++t) {
    const double g = 2.0 * ox;
    om = b1 * om + (1 - b1) * g;
    ov = b2 * ov + (1 - b2) * g * g;
    ox -= lr * (om / (1 - std::pow(b1, t))) / (std::sqrt(ov / (1 - std::pow(b2, t))) + eps);
  }
  REQUIRE(std::abs(ox) < 0.1);  // the oracle itself lands near zero

  Tensor x = Tensor::scalar(1.0, true);
  diff::AdamState st;
  st.lr = 0.1;
  std::vector<Tensor*> params = {&x};
  for (int t = 0; t < 100; ++t) {
    Tape tape;
    Value loss = diff::square(tape.leaf(x));
    tape.backward(loss);
    diff::adam_step(params, st);
  }
  CHECK(std::abs(x.data[0]) < 0.1);
  CHECK(x.data[0] == doctest::Approx(ox).epsilon(1e-10));
}

TEST_CASE("checkpoints round-trip exactly") {
  Rng rng(77);
  Tensor a = Tensor::zeros({3, 2}, true);
  for (double& v : a.data) v = rng.uniform(-10.0, 10.0);
  Tensor b = Tensor::zeros({4}, true);
  for (double& v : b.data) v = rng.normal();
  const auto path = std::filesystem::temp_directory_path() / "vmac_ckpt_test.json";

  diff::NamedParams named = {{"a", &a}, {"b", &b}};
  diff::save_checkpoint(path.string(), named, {{"note", "test"}});

  Tensor a2 = Tensor::zeros({3, 2}, true);
  Tensor b2 = Tensor::zeros({4}, true);
  diff::NamedParams into = {{"a", &a2}, {"b", &b2}};
  diff::load_checkpoint_params(diff::load_checkpoint_json(path.string()), into);
  CHECK(a2.data == a.data);
  CHECK(b2.data == b.data);

  Tensor wrong = Tensor::zeros({2, 3}, true);
  diff::NamedParams bad = {{"a", &wrong}};
  CHECK_THROWS_WITH_AS(diff::load_checkpoint_params(diff::load_checkpoint_json(path.string()), bad),
                       doctest::Contains("shape"), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0}), std::invalid_argument);
  Tensor t({2}, {1.0, std::numeric_limits<double>::quiet_NaN()});
  CHECK_THROWS_AS(t.check_finite("payload"), std::runtime_error);
  Tensor empty({0}, {});
  CHECK(empty.size() == 0);
  Tape tape;
  Value e = tape.constant(empty);
  CHECK(diff::sum(e).item() == 0.0);
}

TEST_SUITE_END();
