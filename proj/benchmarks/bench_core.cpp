#include <benchmark/benchmark.h>

#include "vmac/diff/kernels.hpp"
#include "vmac/diff/tape.hpp"
#include "vmac/envs/coop_nav.hpp"
#include "vmac/envs/factory.hpp"
#include "vmac/marl/learner.hpp"
#include "vmac/rng.hpp"

using namespace vmac;

static void BM_matmul_128(benchmark::State& state) {
  std::vector<double> a(128 * 64), b(64 * 128), c(128 * 128);
  Rng rng(1);
  rng.fill_normal(a);
  rng.fill_normal(b);
  for (auto _ : state) {
    diff::kernels::matmul(a.data(), b.data(), c.data(), 128, 64, 128);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 128ll * 64 * 128 * 2);
}
BENCHMARK(BM_matmul_128);

static void BM_tape_mlp_forward_backward(benchmark::State& state) {
  Rng rng(2);
  diff::Tensor w1 = diff::Tensor::zeros({48, 64}, true);
  diff::Tensor w2 = diff::Tensor::zeros({64, 64}, true);
  diff::Tensor w3 = diff::Tensor::zeros({64, 1}, true);
  for (auto* t : {&w1, &w2, &w3}) {
    for (double& v : t->data) v = rng.uniform(-0.1, 0.1);
  }
  std::vector<double> x(128 * 48);
  rng.fill_normal(x);
  for (auto _ : state) {
    diff::Tape tape;
    auto h1 = diff::relu(diff::matmul(tape.constant({128, 48}, x), tape.leaf(w1)));
    auto h2 = diff::relu(diff::matmul(h1, tape.leaf(w2)));
    auto loss = diff::mean(diff::matmul(h2, tape.leaf(w3)));
    tape.backward(loss);
    benchmark::DoNotOptimize(w1.grad.data());
    w1.zero_grad();
    w2.zero_grad();
    w3.zero_grad();
  }
}
BENCHMARK(BM_tape_mlp_forward_backward);

static void BM_policy_sample(benchmark::State& state) {
  Rng rng(3);
  nets::GaussianPolicy policy(14, 2, 8, {128, 128}, rng);
  std::vector<double> obs(14), z(8), eps(2);
  rng.fill_normal(obs);
  rng.fill_normal(z);
  rng.fill_normal(eps);
  for (auto _ : state) {
    auto s = policy.sample_raw(obs, z, eps);
    benchmark::DoNotOptimize(s.action.data());
  }
}
BENCHMARK(BM_policy_sample);

static void BM_coopnav_step(benchmark::State& state) {
  envs::CoopNavEnv env;
  env.reset(7);
  Rng rng(4);
  envs::JointAction a(3, std::vector<double>{0.0, 0.0});
  int t = 0;
  for (auto _ : state) {
    for (auto& ai : a) {
      ai[0] = rng.uniform(-1.0, 1.0);
      ai[1] = rng.uniform(-1.0, 1.0);
    }
    auto sr = env.step(a);
    benchmark::DoNotOptimize(sr.reward);
    if (sr.done() || ++t >= 49) {
      env.reset(7 + t);
      t = 0;
    }
  }
}
BENCHMARK(BM_coopnav_step);

static void BM_learner_update(benchmark::State& state) {
  marl::AlgoConfig cfg;
  cfg.algorithm = marl::Algorithm::vm3ac;
  cfg.latent_dim = 8;
  cfg.hidden = {32, 32};
  cfg.batch_size = 128;
  cfg.warmup_steps = 0;
  marl::LearnerState learner(cfg, envs::make_env({{"name", "coop_nav"}}), 11);
  Rng rng(5);
  auto obs = learner.env->reset(rng.next_u64());
  for (int t = 0; t < 300; ++t) {
    auto actions = marl::act_train(learner, obs);
    auto sr = learner.env->step(actions);
    marl::Transition tr{obs, actions, sr.reward, sr.obs, sr.terminal, sr.truncated};
    learner.buffer.push(std::move(tr));
    obs = sr.done() ? learner.env->reset(rng.next_u64()) : sr.obs;
  }
  for (auto _ : state) {
    auto m = marl::update(learner);
    benchmark::DoNotOptimize(m);
  }
}
BENCHMARK(BM_learner_update)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
