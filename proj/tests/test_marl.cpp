#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "vmac/envs/factory.hpp"
#include "vmac/marl/exec.hpp"
#include "vmac/marl/learner.hpp"
#include "vmac/marl/trainer.hpp"
#include "vmac/verify/gradcheck.hpp"

using namespace vmac;
using namespace vmac::marl;

TEST_SUITE_BEGIN("marl");

namespace {

nlohmann::json small_env(int n_agents = 2) {
  return {{"name", "coop_nav"}, {"n_agents", n_agents}, {"n_landmarks", 2}, {"horizon", 8}};
}

AlgoConfig small_cfg(Algorithm algo, double beta, int latent) {
  AlgoConfig c;
  c.algorithm = algo;
  c.beta = beta;
  c.latent_dim = latent;
  c.hidden = {8, 8};
  c.batch_size = 6;
  c.buffer_capacity = 512;
  c.warmup_steps = 0;
  c.update_every = 1;
  return c.normalized();
}

LearnerState make_state(const AlgoConfig& cfg, std::uint64_t seed = 21,
                        const nlohmann::json& env = small_env()) {
  return LearnerState(cfg, envs::make_env(env), seed);
}

void fill_buffer(LearnerState& state, int steps, std::uint64_t seed = 5) {
  Rng rng(seed);
  auto obs = state.env->reset(rng.next_u64());
  for (int t = 0; t < steps; ++t) {
    const auto actions = act_train(state, obs);
    const auto sr = state.env->step(actions);
    Transition tr;
    tr.obs = obs;
    tr.actions = actions;
    tr.reward = sr.reward;
    tr.next_obs = sr.obs;
    tr.terminal = sr.terminal;
    tr.truncated = sr.truncated;
    state.buffer.push(std::move(tr));
    obs = sr.done() ? state.env->reset(rng.next_u64()) : sr.obs;
  }
}

Batch sample_batch(LearnerState& state, int n) {
  return make_batch(state.buffer, state.buffer.sample_indices(n, state.rng_sampler));
}

}  // namespace

TEST_CASE("replay buffer sampling is seeded and bounded to the filled region") {
  ReplayBuffer buf(100);
  for (int i = 0; i < 10; ++i) {
    Transition t;
    t.obs = {{static_cast<double>(i)}};
    t.actions = {{0.0}};
    t.next_obs = {{0.0}};
    buf.push(std::move(t));
  }
  Rng r1(9), r2(9);
  const auto a = buf.sample_indices(64, r1);
  const auto b = buf.sample_indices(64, r2);
  CHECK(a == b);
  for (std::size_t idx : a) CHECK(idx < 10);

  Transition bad;
  bad.obs = {{std::numeric_limits<double>::infinity()}};
  bad.actions = {{0.0}};
  bad.next_obs = {{0.0}};
  CHECK_THROWS_AS(buf.push(std::move(bad)), std::invalid_argument);
}

TEST_CASE("replay buffer wraps as a ring at capacity") {
  ReplayBuffer buf(4);
  for (int i = 0; i < 11; ++i) {
    Transition t;
    t.obs = {{static_cast<double>(i)}};
    t.actions = {{0.0}};
    t.next_obs = {{0.0}};
    buf.push(std::move(t));
  }
  CHECK(buf.size() == 4);
  std::set<double> seen;
  for (std::size_t i = 0; i < 4; ++i) seen.insert(buf.at(i).obs[0][0]);
  for (double v : seen) CHECK(v >= 7.0);
}

TEST_CASE("one shared latent per training step, verified by instrumentation") {
  auto state = make_state(small_cfg(Algorithm::vm3ac, 0.1, 4));
  auto obs = state.env->reset(1);
  for (int t = 0; t < 12; ++t) {
    const auto actions = act_train(state, obs);
    CHECK(static_cast<int>(actions.size()) == state.n_agents);
    const auto sr = state.env->step(actions);
    obs = sr.done() ? state.env->reset(100 + t) : sr.obs;
  }
  CHECK(state.audit.env_steps == 12);
  CHECK(state.audit.env_draws == 12);  // exactly one draw per step
  CHECK(state.audit.share_violations == 0);
  CHECK(state.audit.share_checks == 12 * state.n_agents);
}

TEST_CASE("fixed rng state makes act_train deterministic") {
  auto state1 = make_state(small_cfg(Algorithm::vm3ac, 0.1, 4));
  LearnerState state2 = state1;
  auto obs1 = state1.env->reset(3);
  auto obs2 = state2.env->reset(3);
  REQUIRE(obs1 == obs2);
  for (int t = 0; t < 5; ++t) {
    const auto a1 = act_train(state1, obs1);
    const auto a2 = act_train(state2, obs2);
    CHECK(a1 == a2);
    obs1 = state1.env->step(a1).obs;
    obs2 = state2.env->step(a2).obs;
  }
}

TEST_CASE("latent dimension zero acts on observations alone") {
  auto state = make_state(small_cfg(Algorithm::masac, 0.1, 0));
  auto obs = state.env->reset(1);
  const auto actions = act_train(state, obs);
  CHECK(actions.size() == 2);
  CHECK(state.audit.env_draws == 1);
}

TEST_CASE("execution latent modes") {
  auto state = make_state(small_cfg(Algorithm::vm3ac, 0.1, 3));

  SUBCASE("seeded mode regenerates identical latents locally for 1000 steps") {
    ExecSession session(state, ExecLatentMode::seeded, 99);
    auto obs = state.env->reset(5);
    for (int t = 0; t < 1000; ++t) {
      const auto actions = session.act(obs);
      auto sr = state.env->step(actions);
      obs = sr.done() ? state.env->reset(5 + t) : sr.obs;
    }
    CHECK(session.audit().steps == 1000);
    CHECK(session.audit().z_mismatches == 0);
    CHECK(session.audit().cross_reads == 0);
    CHECK(session.audit().own_reads == 2000);
  }

  SUBCASE("zero mode uses the zero vector every step") {
    std::vector<nets::GaussianPolicy> policies;
    for (const auto& a : state.agents) policies.push_back(a.policy);
    DecentralizedActor actor(0, policies[0], ExecLatentMode::zero, 4242);
    ExecAudit audit;
    std::vector<double> obs(state.obs_dims[0], 0.1);
    for (int t = 0; t < 50; ++t) {
      actor.act(0, obs, audit);
      for (double z : actor.last_z()) CHECK(z == 0.0);
    }
  }

  SUBCASE("unknown mode strings are rejected") {
    CHECK_THROWS_AS(exec_mode_from_string("both"), std::invalid_argument);
  }
}

TEST_CASE("value targets reduce to the minimum critic when beta is zero") {
  auto state = make_state(small_cfg(Algorithm::maac, 0.0, 0));
  fill_buffer(state, 20);
  const Batch batch = sample_batch(state, 5);
  const BatchNoise noise = draw_batch_noise(state, 5);
  const auto targets = value_targets(state, batch, noise, 0);

  // independent per-sample recomputation
  for (int b = 0; b < 5; ++b) {
    std::vector<double> x;
    for (int i = 0; i < state.n_agents; ++i) {
      const auto& o = batch.items[b].obs[i];
      x.insert(x.end(), o.begin(), o.end());
    }
    std::vector<double> a_all;
    for (int i = 0; i < state.n_agents; ++i) {
      std::vector<double> z_row(noise.z.begin() + b * noise.latent_dim,
                                noise.z.begin() + (b + 1) * noise.latent_dim);
      std::vector<double> eps_row(noise.eps[i].begin() + b * state.act_dims[i],
                                  noise.eps[i].begin() + (b + 1) * state.act_dims[i]);
      const auto s = state.agents[i].policy.sample_raw(batch.items[b].obs[i], z_row, eps_row);
      a_all.insert(a_all.end(), s.action.begin(), s.action.end());
    }
    const auto e = state.agents[0].critics.eval_raw(x, a_all);
    CHECK(targets[b] == doctest::Approx(e.q_min).epsilon(1e-12));
  }
}

TEST_CASE("single-agent value target is the entropy-regularized critic minimum") {
  auto state = make_state(small_cfg(Algorithm::masac, 0.37, 0), 31, small_env(1));
  REQUIRE(state.n_agents == 1);
  fill_buffer(state, 16);
  const Batch batch = sample_batch(state, 4);
  const BatchNoise noise = draw_batch_noise(state, 4);
  const auto targets = value_targets(state, batch, noise, 0);
  for (int b = 0; b < 4; ++b) {
    std::vector<double> z_row;
    std::vector<double> eps_row(noise.eps[0].begin() + b * state.act_dims[0],
                                noise.eps[0].begin() + (b + 1) * state.act_dims[0]);
    const auto s = state.agents[0].policy.sample_raw(batch.items[b].obs[0], z_row, eps_row);
    const auto e = state.agents[0].critics.eval_raw(batch.items[b].obs[0], s.action);
    CHECK(targets[b] ==
          doctest::Approx(e.q_min - 0.37 * s.log_prob).epsilon(1e-12));
  }
}

TEST_CASE("two-agent value target matches an independent scalar oracle") {
  auto cfg = small_cfg(Algorithm::vm3ac, 0.2, 3);
  cfg.sigma_q = 0.8;
  auto state = make_state(cfg, 77);
  fill_buffer(state, 24);
  const Batch batch = sample_batch(state, 6);
  const BatchNoise noise = draw_batch_noise(state, 6);

  for (int agent = 0; agent < 2; ++agent) {
    const auto targets = value_targets(state, batch, noise, agent);
    const int other = 1 - agent;
    for (int b = 0; b < 6; ++b) {
      std::vector<double> z_row(noise.z.begin() + b * 3, noise.z.begin() + (b + 1) * 3);
      // fresh actions for both agents under the one shared z
      std::vector<nets::PolicySample> samples(2);
      std::vector<double> a_all;
      for (int i = 0; i < 2; ++i) {
        std::vector<double> eps_row(noise.eps[i].begin() + b * 2,
                                    noise.eps[i].begin() + (b + 1) * 2);
        samples[i] = state.agents[i].policy.sample_raw(batch.items[b].obs[i], z_row, eps_row);
        a_all.insert(a_all.end(), samples[i].action.begin(), samples[i].action.end());
      }
      std::vector<double> x;
      for (int i = 0; i < 2; ++i) {
        x.insert(x.end(), batch.items[b].obs[i].begin(), batch.items[b].obs[i].end());
      }
      const auto e = state.agents[agent].critics.eval_raw(x, a_all);
      const auto& pred = state.agents[agent].predictor;
      const double log_b =
          pred.log_prob_raw(samples[other].action, samples[agent].action,
                            batch.items[b].obs[agent], batch.items[b].obs[other], other);
      const double log_a =
          pred.log_prob_raw(samples[agent].action, samples[other].action,
                            batch.items[b].obs[other], batch.items[b].obs[agent], other);
      const double expect = e.q_min - 0.2 * samples[agent].log_prob +
                            0.2 / 2.0 * (log_a + log_b);
      CHECK(targets[b] == doctest::Approx(expect).epsilon(1e-10));
    }
  }
}

TEST_CASE("critic loss matches its definition on a batch") {
  auto state = make_state(small_cfg(Algorithm::vm3ac, 0.1, 2), 13);
  fill_buffer(state, 20);
  const Batch batch = sample_batch(state, 6);
  const BatchNoise noise = draw_batch_noise(state, 6);
  const auto losses = compute_losses(state, batch, noise, 0);

  double expect = 0.0;
  for (int b = 0; b < 6; ++b) {
    std::vector<double> x, x1, a;
    for (int i = 0; i < 2; ++i) {
      x.insert(x.end(), batch.items[b].obs[i].begin(), batch.items[b].obs[i].end());
      x1.insert(x1.end(), batch.items[b].next_obs[i].begin(), batch.items[b].next_obs[i].end());
      a.insert(a.end(), batch.items[b].actions[i].begin(), batch.items[b].actions[i].end());
    }
    const double vt = state.agents[0].critics.v_target_raw(x1);
    const double qhat = batch.items[b].reward +
                        state.cfg.gamma * (batch.items[b].terminal ? 0.0 : 1.0) * vt;
    const auto e = state.agents[0].critics.eval_raw(x, a);
    expect += 0.5 * (e.q1 - qhat) * (e.q1 - qhat) / 6.0;
    expect += 0.5 * (e.q2 - qhat) * (e.q2 - qhat) / 6.0;
  }
  CHECK(losses.critic_loss == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("policy loss reduces to the plain critic objective without entropy and latent") {
  auto state_maac = make_state(small_cfg(Algorithm::maac, 0.0, 0), 55);
  fill_buffer(state_maac, 20);
  const Batch batch = sample_batch(state_maac, 6);
  const BatchNoise noise = draw_batch_noise(state_maac, 6);
  const auto losses = compute_losses(state_maac, batch, noise, 1);

  double expect = 0.0;
  for (int b = 0; b < 6; ++b) {
    std::vector<double> x, a_all;
    for (int i = 0; i < 2; ++i) {
      x.insert(x.end(), batch.items[b].obs[i].begin(), batch.items[b].obs[i].end());
    }
    for (int i = 0; i < 2; ++i) {
      std::vector<double> eps_row(noise.eps[i].begin() + b * 2,
                                  noise.eps[i].begin() + (b + 1) * 2);
      const auto s = state_maac.agents[i].policy.sample_raw(batch.items[b].obs[i], {}, eps_row);
      a_all.insert(a_all.end(), s.action.begin(), s.action.end());
    }
    std::vector<double> in = x;
    in.insert(in.end(), a_all.begin(), a_all.end());
    double q1 = 0.0;
    state_maac.agents[1].critics.q1.forward_raw_batch(in.data(), 1, &q1);
    expect -= q1 / 6.0;
  }
  CHECK(losses.policy_loss == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("reduction lattice: zeroed variational coefficient reproduces masac") {
  auto cfg_a = small_cfg(Algorithm::vm3ac, 0.13, 3);
  cfg_a.variational_coef = 0.0;
  auto cfg_b = small_cfg(Algorithm::masac, 0.13, 3);
  auto sa = make_state(cfg_a, 101);
  auto sb = make_state(cfg_b, 101);
  fill_buffer(sa, 24, 7);
  fill_buffer(sb, 24, 7);
  const Batch batch_a = sample_batch(sa, 8);
  const Batch batch_b = sample_batch(sb, 8);
  const BatchNoise noise_a = draw_batch_noise(sa, 8);
  const BatchNoise noise_b = draw_batch_noise(sb, 8);
  for (int agent = 0; agent < 2; ++agent) {
    const auto la = compute_losses(sa, batch_a, noise_a, agent);
    const auto lb = compute_losses(sb, batch_b, noise_b, agent);
    CHECK(std::abs(la.value_loss - lb.value_loss) <= 1e-10);
    CHECK(std::abs(la.critic_loss - lb.critic_loss) <= 1e-10);
    CHECK(std::abs(la.policy_loss - lb.policy_loss) <= 1e-10);
  }
}

TEST_CASE("reduction lattice: masac without entropy reproduces maac") {
  auto sa = make_state(small_cfg(Algorithm::masac, 0.0, 0), 202);
  auto sb = make_state(small_cfg(Algorithm::maac, 0.0, 0), 202);
  fill_buffer(sa, 24, 9);
  fill_buffer(sb, 24, 9);
  const Batch ba = sample_batch(sa, 8);
  const Batch bb = sample_batch(sb, 8);
  const BatchNoise na = draw_batch_noise(sa, 8);
  const BatchNoise nb = draw_batch_noise(sb, 8);
  for (int agent = 0; agent < 2; ++agent) {
    const auto la = compute_losses(sa, ba, na, agent);
    const auto lb = compute_losses(sb, bb, nb, agent);
    CHECK(std::abs(la.value_loss - lb.value_loss) <= 1e-10);
    CHECK(std::abs(la.critic_loss - lb.critic_loss) <= 1e-10);
    CHECK(std::abs(la.policy_loss - lb.policy_loss) <= 1e-10);
  }
}

TEST_CASE("reduction lattice: masac with a local critic reproduces isac") {
  auto cfg_masac = small_cfg(Algorithm::masac, 0.1, 0);
  cfg_masac.critic_local = true;
  auto sa = make_state(cfg_masac, 303);
  auto sb = make_state(small_cfg(Algorithm::isac, 0.1, 0), 303);
  fill_buffer(sa, 24, 11);
  fill_buffer(sb, 24, 11);
  const Batch ba = sample_batch(sa, 8);
  const Batch bb = sample_batch(sb, 8);
  const BatchNoise na = draw_batch_noise(sa, 8);
  const BatchNoise nb = draw_batch_noise(sb, 8);
  for (int agent = 0; agent < 2; ++agent) {
    const auto la = compute_losses(sa, ba, na, agent);
    const auto lb = compute_losses(sb, bb, nb, agent);
    CHECK(std::abs(la.value_loss - lb.value_loss) <= 1e-10);
    CHECK(std::abs(la.critic_loss - lb.critic_loss) <= 1e-10);
    CHECK(std::abs(la.policy_loss - lb.policy_loss) <= 1e-10);
  }
}

TEST_CASE("policy loss gradient matches finite differences with frozen noise") {
  auto state = make_state(small_cfg(Algorithm::vm3ac, 0.2, 2), 404);
  fill_buffer(state, 16);
  const Batch batch = sample_batch(state, 4);
  const BatchNoise noise = draw_batch_noise(state, 4);

  auto& agent = state.agents[0];
  for (auto* p : agent.policy.params()) p->zero_grad();
  for (auto* p : agent.predictor.params()) p->zero_grad();
  // pin the sampled joint actions so the finite differences probe the same
  // function the gradient is defined on
  const FreshActions fresh = sample_fresh_actions(state, batch, noise);
  compute_losses(state, batch, noise, 0, kGradPolicy, &fresh);

  auto params = agent.policy.params();
  auto pred_params = agent.predictor.params();
  params.insert(params.end(), pred_params.begin(), pred_params.end());
  const auto res = verify::finite_diff_check(
      params,
      [&]() { return compute_losses(state, batch, noise, 0, kGradNone, &fresh).policy_loss; },
      1e-5, 1e-6, 3);
  CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("update is deterministic from identical snapshots") {
  auto state1 = make_state(small_cfg(Algorithm::vm3ac, 0.1, 2), 505);
  fill_buffer(state1, 20);
  LearnerState state2 = state1;
  const auto m1 = update(state1);
  const auto m2 = update(state2);
  REQUIRE(m1.has_value());
  REQUIRE(m2.has_value());
  CHECK(m1->mean.policy_loss == m2->mean.policy_loss);
  for (int i = 0; i < state1.n_agents; ++i) {
    auto p1 = state1.agents[i].policy.params();
    auto p2 = state2.agents[i].policy.params();
    for (std::size_t k = 0; k < p1.size(); ++k) CHECK(p1[k]->data == p2[k]->data);
    auto c1 = state1.agents[i].critics.v.params();
    auto c2 = state2.agents[i].critics.v.params();
    for (std::size_t k = 0; k < c1.size(); ++k) CHECK(c1[k]->data == c2[k]->data);
  }
}

TEST_CASE("target smoothing edge coefficients") {
  auto cfg = small_cfg(Algorithm::vm3ac, 0.1, 2);
  SUBCASE("tau = 1 copies the live network") {
    cfg.tau = 1.0;
    auto state = make_state(cfg, 606);
    fill_buffer(state, 20);
    REQUIRE(update(state).has_value());
    for (const auto& a : state.agents) {
      auto v = const_cast<nets::Mlp&>(a.critics.v).params();
      auto t = const_cast<nets::Mlp&>(a.critics.v_target).params();
      for (std::size_t k = 0; k < v.size(); ++k) CHECK(v[k]->data == t[k]->data);
    }
  }
  SUBCASE("tau = 0 freezes the target") {
    cfg.tau = 0.0;
    auto state = make_state(cfg, 606);
    auto before = state.agents[0].critics.v_target.params()[0]->data;
    fill_buffer(state, 20);
    REQUIRE(update(state).has_value());
    CHECK(state.agents[0].critics.v_target.params()[0]->data == before);
  }
}

TEST_CASE("update without enough transitions signals a no-op") {
  auto state = make_state(small_cfg(Algorithm::vm3ac, 0.1, 2), 707);
  fill_buffer(state, 3);  // below batch_size = 6
  CHECK_FALSE(update(state).has_value());
}

TEST_CASE("empty batch is rejected") {
  auto state = make_state(small_cfg(Algorithm::vm3ac, 0.1, 2), 808);
  Batch empty;
  BatchNoise noise;
  CHECK_THROWS_AS(compute_losses(state, empty, noise, 0), std::invalid_argument);
}

TEST_CASE("maddpg baseline trains deterministically") {
  auto cfg = small_cfg(Algorithm::maddpg, 0.0, 0);
  auto state1 = make_state(cfg, 909);
  fill_buffer(state1, 20);
  LearnerState state2 = state1;
  const auto m1 = update(state1);
  const auto m2 = update(state2);
  REQUIRE(m1.has_value());
  CHECK(m1->mean.critic_loss == m2->mean.critic_loss);
  CHECK(m1->mean.value_loss == 0.0);
  auto obs = state1.env->reset(4);
  const auto actions = act_train(state1, obs);
  for (const auto& a : actions) {
    for (double v : a) {
      CHECK(v <= 1.0);
      CHECK(v >= -1.0);
    }
  }
}

TEST_CASE("training aborts with diagnostics when a loss turns non-finite") {
  auto cfg = small_cfg(Algorithm::vm3ac, 0.1, 2);
  cfg.warmup_steps = 0;
  auto state = make_state(cfg, 111);
  // corrupt one critic weight so the loss explodes
  state.agents[0].critics.q1.params()[0]->data[0] = 1e300;
  TrainOptions opt;
  opt.total_steps = 30;
  opt.eval_interval = 1000;
  opt.eval_episodes = 1;
  CHECK_THROWS_AS(train(state, opt), TrainAbort);
}

TEST_CASE("training shrinks the action-prediction error on held-out on-policy samples") {
  auto cfg = small_cfg(Algorithm::vm3ac, 0.3, 2);
  cfg.batch_size = 32;
  cfg.lr = 1e-3;
  auto state = make_state(cfg, 424242);

  // mean squared prediction error of agent 0's forward factor on freshly
  // sampled on-policy pairs
  auto prediction_error = [&](std::uint64_t probe_seed) {
    Rng rng(probe_seed);
    auto obs = state.env->reset(rng.next_u64());
    double err = 0.0;
    int count = 0;
    for (int t = 0; t < 64; ++t) {
      std::vector<double> z(static_cast<std::size_t>(state.cfg.latent_dim));
      rng.fill_normal(z);
      std::vector<std::vector<double>> acts(2);
      for (int i = 0; i < 2; ++i) {
        std::vector<double> eps(2);
        rng.fill_normal(eps);
        acts[i] = state.agents[i].policy.sample_raw(obs[i], z, eps).action;
      }
      const auto mu = state.agents[0].predictor.predict_mean_raw(acts[0], obs[0], obs[1], 1);
      for (int k = 0; k < 2; ++k) err += (acts[1][k] - mu[k]) * (acts[1][k] - mu[k]);
      count += 2;
      const auto sr = state.env->step(acts);
      obs = sr.done() ? state.env->reset(rng.next_u64()) : sr.obs;
    }
    return err / count;
  };

  const double before = prediction_error(777);
  fill_buffer(state, 200, 31);
  for (int u = 0; u < 300; ++u) REQUIRE(update(state).has_value());
  const double after = prediction_error(778);
  CHECK(after < before);
}

TEST_CASE("a zero-step training run emits no updates") {
  auto state = make_state(small_cfg(Algorithm::vm3ac, 0.1, 2), 212);
  TrainOptions opt;
  opt.total_steps = 0;
  const auto result = train(state, opt);
  CHECK(result.updates == 0);
  CHECK(result.env_steps == 0);
  CHECK(result.metrics.empty());
}

TEST_CASE("short training run keeps the latent audit clean") {
  auto cfg = small_cfg(Algorithm::vm3ac, 0.1, 2);
  cfg.warmup_steps = 8;
  auto state = make_state(cfg, 313);
  TrainOptions opt;
  opt.total_steps = 40;
  opt.eval_interval = 20;
  opt.eval_episodes = 2;
  const auto result = train(state, opt);
  CHECK(result.audit.env_steps == 40);
  CHECK(result.audit.env_draws == 40);
  CHECK(result.audit.share_violations == 0);
  CHECK(result.audit.update_draws == result.audit.update_samples);
  CHECK(result.eval_audit.cross_reads == 0);
  CHECK(result.metrics.size() >= 2);  // step 0 and at least one later point
}

TEST_SUITE_END();
