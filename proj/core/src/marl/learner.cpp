#include "vmac/marl/learner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vmac/diff/tape.hpp"

namespace vmac::marl {

using diff::Tape;
using diff::Tensor;
using diff::Value;

namespace {

// stream ids for deriving independent seeds from the master seed; network
// seeds depend only on (agent, kind) so identical shapes initialize
// identically across algorithm variants
constexpr std::uint64_t kStreamEnv = 1;
constexpr std::uint64_t kStreamLatent = 2;
constexpr std::uint64_t kStreamExplore = 3;
constexpr std::uint64_t kStreamSampler = 4;
constexpr std::uint64_t kStreamNets = 0x100;

std::uint64_t net_seed(std::uint64_t master, int agent, int kind) {
  return derive_seed(master, kStreamNets + static_cast<std::uint64_t>(agent) * 16 +
                                 static_cast<std::uint64_t>(kind));
}

std::uint64_t span_hash(const double* p, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(p);
  for (std::size_t i = 0; i < n * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

LearnerState::LearnerState(const AlgoConfig& config, std::unique_ptr<envs::MarkovGameEnv> e,
                           std::uint64_t seed)
    : cfg(config.normalized()),
      env(std::move(e)),
      master_seed(seed),
      buffer(config.buffer_capacity),
      rng_env(derive_seed(seed, kStreamEnv)),
      rng_latent(derive_seed(seed, kStreamLatent)),
      rng_explore(derive_seed(seed, kStreamExplore)),
      rng_sampler(derive_seed(seed, kStreamSampler)) {
  cfg.validate();
  if (!env) throw std::invalid_argument("LearnerState: missing environment");
  n_agents = env->n_agents();
  obs_dims.resize(static_cast<std::size_t>(n_agents));
  act_dims.resize(static_cast<std::size_t>(n_agents));
  for (int i = 0; i < n_agents; ++i) {
    obs_dims[static_cast<std::size_t>(i)] = env->obs_dim(i);
    act_dims[static_cast<std::size_t>(i)] = env->action_dim(i);
    obs_total += env->obs_dim(i);
    act_total += env->action_dim(i);
  }

  const bool homogeneous_obs =
      std::all_of(obs_dims.begin(), obs_dims.end(), [&](int d) { return d == obs_dims[0]; });
  const bool homogeneous_act =
      std::all_of(act_dims.begin(), act_dims.end(), [&](int d) { return d == act_dims[0]; });
  if (!homogeneous_obs || !homogeneous_act) {
    throw std::invalid_argument(
        "LearnerState: the shared action predictor requires homogeneous "
        "observation and action dimensions");
  }

  agents.reserve(static_cast<std::size_t>(n_agents));
  for (int i = 0; i < n_agents; ++i) {
    AgentLearner a;
    {
      Rng r(net_seed(seed, i, 0));
      a.policy = nets::GaussianPolicy(obs_dims[static_cast<std::size_t>(i)],
                                      act_dims[static_cast<std::size_t>(i)], cfg.latent_dim,
                                      cfg.hidden, r);
    }
    {
      Rng r(net_seed(seed, i, 1));
      a.critics = nets::CriticSet::make(critic_x_dim(i), critic_a_dim(i), cfg.hidden, r);
    }
    {
      Rng r(net_seed(seed, i, 2));
      a.predictor = nets::VariationalPredictor(i, n_agents, obs_dims[static_cast<std::size_t>(i)],
                                               act_dims[static_cast<std::size_t>(i)], cfg.sigma_q,
                                               cfg.hidden, r);
    }
    if (cfg.algorithm == Algorithm::maddpg) {
      Rng r(net_seed(seed, i, 3));
      a.policy_target = nets::GaussianPolicy(obs_dims[static_cast<std::size_t>(i)],
                                             act_dims[static_cast<std::size_t>(i)], 0, cfg.hidden, r);
      a.policy_target.copy_params_from(a.policy);
      nets::MlpSpec qspec{critic_x_dim(i) + critic_a_dim(i), 1, cfg.hidden, false};
      Rng r2(net_seed(seed, i, 4));
      a.q1_target = nets::Mlp(qspec, r2);
      a.q1_target.copy_params_from(a.critics.q1);
    }
    a.opt_policy.lr = a.opt_q1.lr = a.opt_q2.lr = a.opt_v.lr = a.opt_pred.lr = cfg.lr;
    agents.push_back(std::move(a));
  }
}

LearnerState::LearnerState(const LearnerState& other)
    : cfg(other.cfg),
      env(other.env->clone()),
      master_seed(other.master_seed),
      n_agents(other.n_agents),
      obs_dims(other.obs_dims),
      act_dims(other.act_dims),
      obs_total(other.obs_total),
      act_total(other.act_total),
      agents(other.agents),
      buffer(other.buffer),
      rng_env(other.rng_env),
      rng_latent(other.rng_latent),
      rng_explore(other.rng_explore),
      rng_sampler(other.rng_sampler),
      env_steps(other.env_steps),
      updates(other.updates),
      planned_steps(other.planned_steps),
      audit(other.audit) {}

int LearnerState::critic_x_dim(int agent) const {
  return cfg.critic_local ? obs_dims[static_cast<std::size_t>(agent)] : obs_total;
}

int LearnerState::critic_a_dim(int agent) const {
  return cfg.critic_local ? act_dims[static_cast<std::size_t>(agent)] : act_total;
}

diff::NamedParams LearnerState::named_params() {
  diff::NamedParams out;
  for (int i = 0; i < n_agents; ++i) {
    const std::string base = "agent" + std::to_string(i);
    auto& a = agents[static_cast<std::size_t>(i)];
    for (auto& p : a.policy.named_params(base + "/policy")) out.push_back(p);
    for (auto& p : a.critics.named_params(base + "/critics")) out.push_back(p);
    for (auto& p : a.predictor.named_params(base + "/predictor")) out.push_back(p);
    if (cfg.algorithm == Algorithm::maddpg) {
      for (auto& p : a.policy_target.named_params(base + "/policy_target")) out.push_back(p);
      for (auto& p : a.q1_target.named_params(base + "/q1_target")) out.push_back(p);
    }
  }
  return out;
}

nlohmann::json LearnerState::checkpoint_meta() const {
  return nlohmann::json{{"algorithm", to_string(cfg.algorithm)},
                        {"env", env->name()},
                        {"n_agents", n_agents},
                        {"obs_dims", obs_dims},
                        {"act_dims", act_dims},
                        {"algo_config", cfg.to_json()}};
}

// ---- batches -----------------------------------------------------------------

Batch make_batch(const ReplayBuffer& buffer, const std::vector<std::size_t>& indices) {
  Batch b;
  b.items.reserve(indices.size());
  for (std::size_t i : indices) b.items.push_back(buffer.at(i));
  return b;
}

BatchNoise draw_batch_noise(LearnerState& state, int batch) {
  BatchNoise n;
  n.batch = batch;
  n.latent_dim = state.cfg.latent_dim;
  n.z.resize(static_cast<std::size_t>(batch) * n.latent_dim);
  // one shared z row per sample, drawn before any per-agent noise
  state.rng_latent.fill_normal(n.z);
  state.audit.update_draws += batch;
  state.audit.update_samples += batch;
  n.eps.resize(static_cast<std::size_t>(state.n_agents));
  for (int i = 0; i < state.n_agents; ++i) {
    n.eps[static_cast<std::size_t>(i)].resize(
        static_cast<std::size_t>(batch) * state.act_dims[static_cast<std::size_t>(i)]);
    state.rng_explore.fill_normal(n.eps[static_cast<std::size_t>(i)]);
  }
  return n;
}

namespace {

struct BatchArrays {
  int batch = 0;
  std::vector<double> x_t, x_tp1;                    // [B, obs_total]
  std::vector<std::vector<double>> o_t, o_tp1, a_t;  // per agent
  std::vector<double> a_joint;                       // [B, act_total]
  std::vector<double> reward, nonterminal;           // [B]
};

BatchArrays build_arrays(const LearnerState& state, const Batch& batch) {
  if (batch.items.empty()) throw std::invalid_argument("empty batch");
  BatchArrays arr;
  const int B = static_cast<int>(batch.items.size());
  arr.batch = B;
  arr.x_t.resize(static_cast<std::size_t>(B) * state.obs_total);
  arr.x_tp1.resize(static_cast<std::size_t>(B) * state.obs_total);
  arr.a_joint.resize(static_cast<std::size_t>(B) * state.act_total);
  arr.reward.resize(static_cast<std::size_t>(B));
  arr.nonterminal.resize(static_cast<std::size_t>(B));
  arr.o_t.resize(static_cast<std::size_t>(state.n_agents));
  arr.o_tp1.resize(static_cast<std::size_t>(state.n_agents));
  arr.a_t.resize(static_cast<std::size_t>(state.n_agents));
  for (int i = 0; i < state.n_agents; ++i) {
    arr.o_t[static_cast<std::size_t>(i)].resize(
        static_cast<std::size_t>(B) * state.obs_dims[static_cast<std::size_t>(i)]);
    arr.o_tp1[static_cast<std::size_t>(i)].resize(
        static_cast<std::size_t>(B) * state.obs_dims[static_cast<std::size_t>(i)]);
    arr.a_t[static_cast<std::size_t>(i)].resize(
        static_cast<std::size_t>(B) * state.act_dims[static_cast<std::size_t>(i)]);
  }
  for (int b = 0; b < B; ++b) {
    const Transition& t = batch.items[static_cast<std::size_t>(b)];
    int xoff = 0, aoff = 0;
    for (int i = 0; i < state.n_agents; ++i) {
      const int od = state.obs_dims[static_cast<std::size_t>(i)];
      const int ad = state.act_dims[static_cast<std::size_t>(i)];
      for (int k = 0; k < od; ++k) {
        const double o0 = t.obs[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
        const double o1 = t.next_obs[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
        arr.x_t[static_cast<std::size_t>(b) * state.obs_total + xoff + k] = o0;
        arr.x_tp1[static_cast<std::size_t>(b) * state.obs_total + xoff + k] = o1;
        arr.o_t[static_cast<std::size_t>(i)][static_cast<std::size_t>(b) * od + k] = o0;
        arr.o_tp1[static_cast<std::size_t>(i)][static_cast<std::size_t>(b) * od + k] = o1;
      }
      for (int k = 0; k < ad; ++k) {
        const double a = t.actions[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
        arr.a_joint[static_cast<std::size_t>(b) * state.act_total + aoff + k] = a;
        arr.a_t[static_cast<std::size_t>(i)][static_cast<std::size_t>(b) * ad + k] = a;
      }
      xoff += od;
      aoff += ad;
    }
    arr.reward[static_cast<std::size_t>(b)] = t.reward;
    arr.nonterminal[static_cast<std::size_t>(b)] = t.terminal ? 0.0 : 1.0;
  }
  return arr;
}

FreshActions sample_fresh(const LearnerState& state, const BatchArrays& arr,
                          const BatchNoise& noise, LatentAudit* audit) {
  const int B = arr.batch;
  if (noise.batch != B || noise.latent_dim != state.cfg.latent_dim ||
      static_cast<int>(noise.eps.size()) != state.n_agents) {
    throw std::invalid_argument("sample_fresh: noise does not match the batch");
  }
  FreshActions f;
  f.actions.resize(static_cast<std::size_t>(state.n_agents));
  f.log_probs.resize(static_cast<std::size_t>(state.n_agents));
  f.joint.resize(static_cast<std::size_t>(B) * state.act_total);
  std::vector<std::uint64_t> z_ref;
  if (audit && B > 0) {
    z_ref.resize(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b) {
      z_ref[static_cast<std::size_t>(b)] = span_hash(
          noise.z.data() + static_cast<std::size_t>(b) * noise.latent_dim,
          static_cast<std::size_t>(noise.latent_dim));
    }
  }
  int aoff = 0;
  for (int i = 0; i < state.n_agents; ++i) {
    const int ad = state.act_dims[static_cast<std::size_t>(i)];
    auto& acts = f.actions[static_cast<std::size_t>(i)];
    auto& lps = f.log_probs[static_cast<std::size_t>(i)];
    acts.resize(static_cast<std::size_t>(B) * ad);
    lps.resize(static_cast<std::size_t>(B));
    state.agents[static_cast<std::size_t>(i)].policy.sample_raw_batch(
        arr.o_t[static_cast<std::size_t>(i)].data(), noise.z.data(),
        noise.eps[static_cast<std::size_t>(i)].data(), B, acts.data(), lps.data());
    if (audit) {
      // every agent must have consumed the identical latent row per sample
      for (int b = 0; b < B; ++b) {
        const std::uint64_t h = span_hash(
            noise.z.data() + static_cast<std::size_t>(b) * noise.latent_dim,
            static_cast<std::size_t>(noise.latent_dim));
        audit->share_checks += 1;
        if (h != z_ref[static_cast<std::size_t>(b)]) audit->share_violations += 1;
      }
    }
    for (int b = 0; b < B; ++b) {
      for (int k = 0; k < ad; ++k) {
        f.joint[static_cast<std::size_t>(b) * state.act_total + aoff + k] =
            acts[static_cast<std::size_t>(b) * ad + k];
      }
    }
    aoff += ad;
  }
  return f;
}

// rows of (x ++ a) for a critic input
std::vector<double> join_rows(const std::vector<double>& x, int xd, const std::vector<double>& a,
                              int ad, int B) {
  std::vector<double> out(static_cast<std::size_t>(B) * (xd + ad));
  for (int b = 0; b < B; ++b) {
    double* row = out.data() + static_cast<std::size_t>(b) * (xd + ad);
    for (int k = 0; k < xd; ++k) row[k] = x[static_cast<std::size_t>(b) * xd + k];
    for (int k = 0; k < ad; ++k) row[xd + k] = a[static_cast<std::size_t>(b) * ad + k];
  }
  return out;
}

std::vector<double> value_targets_impl(const LearnerState& state, const BatchArrays& arr,
                                       const FreshActions& fresh, int agent,
                                       double* mean_var_log_prob) {
  const int B = arr.batch;
  const auto& al = state.agents[static_cast<std::size_t>(agent)];
  const int xd = state.critic_x_dim(agent);
  const int ad = state.critic_a_dim(agent);
  const std::vector<double>& x = state.cfg.critic_local
                                     ? arr.o_t[static_cast<std::size_t>(agent)]
                                     : arr.x_t;
  const std::vector<double>& a = state.cfg.critic_local
                                     ? fresh.actions[static_cast<std::size_t>(agent)]
                                     : fresh.joint;
  const auto qin = join_rows(x, xd, a, ad, B);
  std::vector<double> q1(static_cast<std::size_t>(B)), q2(static_cast<std::size_t>(B));
  al.critics.q1.forward_raw_batch(qin.data(), B, q1.data());
  al.critics.q2.forward_raw_batch(qin.data(), B, q2.data());

  std::vector<double> vhat(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    const double qmin = q1[static_cast<std::size_t>(b)] <= q2[static_cast<std::size_t>(b)]
                            ? q1[static_cast<std::size_t>(b)]
                            : q2[static_cast<std::size_t>(b)];
    vhat[static_cast<std::size_t>(b)] =
        qmin - state.cfg.beta * fresh.log_probs[static_cast<std::size_t>(agent)]
                                               [static_cast<std::size_t>(b)];
  }

  double var_acc = 0.0;
  int var_terms = 0;
  if (state.cfg.beta != 0.0 && state.cfg.variational_coef != 0.0) {
    const double coef = state.cfg.beta / state.n_agents * state.cfg.variational_coef;
    std::vector<double> log_b(static_cast<std::size_t>(B)), log_a(static_cast<std::size_t>(B));
    for (int j = 0; j < state.n_agents; ++j) {
      if (j == agent) continue;
      const auto& pred = state.agents[static_cast<std::size_t>(agent)].predictor;
      // forward factor: predict agent j's fresh action from ours
      pred.log_prob_raw_batch(fresh.actions[static_cast<std::size_t>(j)].data(),
                              fresh.actions[static_cast<std::size_t>(agent)].data(),
                              arr.o_t[static_cast<std::size_t>(agent)].data(),
                              arr.o_t[static_cast<std::size_t>(j)].data(), j, B, log_b.data());
      // reverse factor: predict our action from agent j's
      pred.log_prob_raw_batch(fresh.actions[static_cast<std::size_t>(agent)].data(),
                              fresh.actions[static_cast<std::size_t>(j)].data(),
                              arr.o_t[static_cast<std::size_t>(j)].data(),
                              arr.o_t[static_cast<std::size_t>(agent)].data(), j, B, log_a.data());
      for (int b = 0; b < B; ++b) {
        vhat[static_cast<std::size_t>(b)] +=
            coef * (log_a[static_cast<std::size_t>(b)] + log_b[static_cast<std::size_t>(b)]);
        var_acc += log_b[static_cast<std::size_t>(b)];
        ++var_terms;
      }
    }
  }
  if (mean_var_log_prob) {
    *mean_var_log_prob = var_terms > 0 ? var_acc / var_terms : 0.0;
  }
  return vhat;
}

Value batch_constant(Tape& tape, const std::vector<double>& data, int B, int d) {
  return tape.constant({B, d}, data);
}

// L_V = mean (V(x_t) - vhat)^2 / 2
double value_loss_pass(LearnerState& state, const BatchArrays& arr,
                       const std::vector<double>& vhat, int agent, bool grads) {
  const int B = arr.batch;
  auto& al = state.agents[static_cast<std::size_t>(agent)];
  const int xd = state.critic_x_dim(agent);
  const std::vector<double>& x =
      state.cfg.critic_local ? arr.o_t[static_cast<std::size_t>(agent)] : arr.x_t;
  Tape tape;
  Value xin = batch_constant(tape, x, B, xd);
  Value v = diff::sum_last(al.critics.v.forward(tape, xin));
  Value target = tape.constant({B}, vhat);
  Value loss = diff::scale(diff::mean(diff::square(diff::sub(v, target))), 0.5);
  const double out = loss.item();
  if (grads) tape.backward(loss);
  return out;
}

// L_Q = mean (Q1 - qhat)^2 / 2 + mean (Q2 - qhat)^2 / 2 on replayed actions
double critic_loss_pass(LearnerState& state, const BatchArrays& arr,
                        const std::vector<double>& qhat, int agent, bool grads) {
  const int B = arr.batch;
  auto& al = state.agents[static_cast<std::size_t>(agent)];
  const int xd = state.critic_x_dim(agent);
  const int ad = state.critic_a_dim(agent);
  const std::vector<double>& x =
      state.cfg.critic_local ? arr.o_t[static_cast<std::size_t>(agent)] : arr.x_t;
  const std::vector<double>& a =
      state.cfg.critic_local ? arr.a_t[static_cast<std::size_t>(agent)] : arr.a_joint;
  const auto qin = join_rows(x, xd, a, ad, B);

  Tape tape;
  Value in = batch_constant(tape, qin, B, xd + ad);
  Value target = tape.constant({B}, qhat);
  Value q1 = diff::sum_last(al.critics.q1.forward(tape, in));
  Value e1 = diff::scale(diff::mean(diff::square(diff::sub(q1, target))), 0.5);
  Value loss = e1;
  if (state.cfg.algorithm != Algorithm::maddpg) {
    Value q2 = diff::sum_last(al.critics.q2.forward(tape, in));
    Value e2 = diff::scale(diff::mean(diff::square(diff::sub(q2, target))), 0.5);
    loss = diff::add(e1, e2);
  }
  const double out = loss.item();
  if (grads) tape.backward(loss);
  return out;
}

// bootstrap targets: r + gamma * (1 - done) * V_target(x_{t+1}); the
// deterministic baseline bootstraps through its target critic and target
// policies instead.
std::vector<double> bootstrap_targets(const LearnerState& state, const BatchArrays& arr,
                                      int agent) {
  const int B = arr.batch;
  const auto& al = state.agents[static_cast<std::size_t>(agent)];
  std::vector<double> next(static_cast<std::size_t>(B), 0.0);
  const int xd = state.critic_x_dim(agent);
  const std::vector<double>& x1 =
      state.cfg.critic_local ? arr.o_tp1[static_cast<std::size_t>(agent)] : arr.x_tp1;

  if (state.cfg.algorithm == Algorithm::maddpg) {
    // target policies' deterministic actions at x_{t+1}
    std::vector<double> a_next(static_cast<std::size_t>(B) * state.act_total);
    std::vector<double> lp(static_cast<std::size_t>(B));
    int aoff = 0;
    std::vector<double> zero_z;
    for (int j = 0; j < state.n_agents; ++j) {
      const int ad = state.act_dims[static_cast<std::size_t>(j)];
      std::vector<double> acts(static_cast<std::size_t>(B) * ad);
      std::vector<double> zeros(static_cast<std::size_t>(B) * ad, 0.0);
      state.agents[static_cast<std::size_t>(j)].policy_target.sample_raw_batch(
          arr.o_tp1[static_cast<std::size_t>(j)].data(), zero_z.data(), zeros.data(), B,
          acts.data(), lp.data());
      for (int b = 0; b < B; ++b) {
        for (int k = 0; k < ad; ++k) {
          a_next[static_cast<std::size_t>(b) * state.act_total + aoff + k] =
              acts[static_cast<std::size_t>(b) * ad + k];
        }
      }
      aoff += ad;
    }
    const std::vector<double>& a_used = a_next;
    const auto qin = join_rows(x1, xd, a_used, state.critic_a_dim(agent), B);
    al.q1_target.forward_raw_batch(qin.data(), B, next.data());
  } else {
    al.critics.v_target.forward_raw_batch(x1.data(), B, next.data());
  }
  std::vector<double> out(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    out[static_cast<std::size_t>(b)] =
        arr.reward[static_cast<std::size_t>(b)] +
        state.cfg.gamma * arr.nonterminal[static_cast<std::size_t>(b)] *
            next[static_cast<std::size_t>(b)];
  }
  return out;
}

struct PolicyPassResult {
  double loss = 0.0;
  double entropy = 0.0;
  double var_log_prob = 0.0;
};

// L_pi = mean[ -Q1(x, a~) + beta log pi(a~_i) - (beta/N) sum_j (log q_a + log q_b) ]
// with reparameterized own action; the reverse factor sees the own action
// through a stop-gradient, so it trains the predictor but not the policy.
PolicyPassResult policy_loss_pass(LearnerState& state, const BatchArrays& arr,
                                  const BatchNoise& noise, const FreshActions& fresh, int agent,
                                  bool grads) {
  const int B = arr.batch;
  auto& al = state.agents[static_cast<std::size_t>(agent)];
  const int xd = state.critic_x_dim(agent);
  const bool maddpg = state.cfg.algorithm == Algorithm::maddpg;

  Tape tape;
  Value obs = batch_constant(tape, arr.o_t[static_cast<std::size_t>(agent)], B,
                             state.obs_dims[static_cast<std::size_t>(agent)]);
  Value z = tape.constant({B, state.cfg.latent_dim}, noise.z);
  const int ad = state.act_dims[static_cast<std::size_t>(agent)];
  Value eps = maddpg
                  ? tape.constant({B, ad},
                                  std::vector<double>(static_cast<std::size_t>(B) * ad, 0.0))
                  : batch_constant(tape, noise.eps[static_cast<std::size_t>(agent)], B, ad);
  auto sampled = al.policy.sample(tape, obs, z, eps);

  // joint action with the own slot reparameterized and the rest frozen:
  // fresh samples for the stochastic family, replayed actions for maddpg
  Value joint = sampled.action;
  if (!state.cfg.critic_local) {
    std::vector<Value> parts;
    for (int j = 0; j < state.n_agents; ++j) {
      if (j == agent) {
        parts.push_back(sampled.action);
      } else {
        const std::vector<double>& src = maddpg ? arr.a_t[static_cast<std::size_t>(j)]
                                                : fresh.actions[static_cast<std::size_t>(j)];
        parts.push_back(
            batch_constant(tape, src, B, state.act_dims[static_cast<std::size_t>(j)]));
      }
    }
    joint = diff::concat(parts);
  }
  const std::vector<double>& x =
      state.cfg.critic_local ? arr.o_t[static_cast<std::size_t>(agent)] : arr.x_t;
  Value qin = diff::concat(batch_constant(tape, x, B, xd), joint);
  Value q1 = diff::sum_last(al.critics.q1.forward(tape, qin));

  Value per_sample = diff::neg(q1);
  if (!maddpg && state.cfg.beta != 0.0) {
    per_sample = diff::add(per_sample, diff::scale(sampled.log_prob, state.cfg.beta));
  }

  double var_diag = 0.0;
  if (!maddpg && state.cfg.beta != 0.0 && state.cfg.variational_coef != 0.0) {
    Value acc;
    bool first = true;
    int terms = 0;
    for (int j = 0; j < state.n_agents; ++j) {
      if (j == agent) continue;
      Value obs_j = batch_constant(tape, arr.o_t[static_cast<std::size_t>(j)], B,
                                   state.obs_dims[static_cast<std::size_t>(j)]);
      Value a_j = batch_constant(tape, fresh.actions[static_cast<std::size_t>(j)], B,
                                 state.act_dims[static_cast<std::size_t>(j)]);
      // forward factor (b): gradient reaches the policy through the source action
      Value log_b = al.predictor.log_prob(tape, a_j, sampled.action, obs, obs_j, j);
      // reverse factor (a): the own action enters as a frozen constant, so no
      // gradient reaches the policy through this term
      Value own_frozen = batch_constant(tape, fresh.actions[static_cast<std::size_t>(agent)], B,
                                        state.act_dims[static_cast<std::size_t>(agent)]);
      Value log_a = al.predictor.log_prob(tape, own_frozen, a_j, obs_j, obs, j);
      Value pair = diff::add(log_a, log_b);
      acc = first ? pair : diff::add(acc, pair);
      first = false;
      for (double v : log_b.data()) var_diag += v;
      terms += B;
    }
    if (!first) {
      const double coef = state.cfg.beta / state.n_agents * state.cfg.variational_coef;
      per_sample = diff::sub(per_sample, diff::scale(acc, coef));
    }
    var_diag = terms > 0 ? var_diag / terms : 0.0;
  }

  Value loss = diff::mean(per_sample);
  PolicyPassResult res;
  res.loss = loss.item();
  res.var_log_prob = var_diag;
  if (!maddpg) {
    double ent = 0.0;
    for (double lp : sampled.log_prob.data()) ent -= lp;
    res.entropy = ent / B;
  }
  if (grads) tape.backward(loss);
  return res;
}

// scales all gradients of one network so its global L2 norm stays at most
// max_norm; 0 disables
void clip_gradients(const std::vector<Tensor*>& params, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const Tensor* p : params) {
    for (double g : p->grad) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double scale = max_norm / norm;
  for (Tensor* p : params) {
    for (double& g : p->grad) g *= scale;
  }
}

double anneal_noise(const LearnerState& state) {
  const double hi = state.cfg.exploration_noise;
  const double lo = state.cfg.exploration_noise_final;
  if (state.planned_steps <= 0) return hi;
  const double frac = std::min(
      1.0, static_cast<double>(state.env_steps) / static_cast<double>(state.planned_steps));
  return lo + (hi - lo) * (1.0 - frac);
}

}  // namespace

envs::JointAction act_train(LearnerState& state, const envs::JointObs& obs) {
  if (static_cast<int>(obs.size()) != state.n_agents) {
    throw std::invalid_argument("act_train: observation count mismatch");
  }
  envs::JointAction joint(static_cast<std::size_t>(state.n_agents));
  state.audit.env_steps += 1;

  // one shared latent draw per environment step
  std::vector<double> z(static_cast<std::size_t>(state.cfg.latent_dim));
  state.rng_latent.fill_normal(z);
  state.audit.env_draws += 1;
  const std::uint64_t z_hash = span_hash(z.data(), z.size());

  if (state.cfg.algorithm == Algorithm::maddpg) {
    const double sigma = anneal_noise(state);
    for (int i = 0; i < state.n_agents; ++i) {
      const auto& al = state.agents[static_cast<std::size_t>(i)];
      std::vector<double> a =
          al.policy.mean_action_raw(obs[static_cast<std::size_t>(i)], {});
      for (double& v : a) {
        v += sigma * state.rng_explore.normal();
        v = v > 1.0 ? 1.0 : (v < -1.0 ? -1.0 : v);
      }
      joint[static_cast<std::size_t>(i)] = std::move(a);
    }
    return joint;
  }

  for (int i = 0; i < state.n_agents; ++i) {
    const auto& al = state.agents[static_cast<std::size_t>(i)];
    std::vector<double> eps(static_cast<std::size_t>(
        state.act_dims[static_cast<std::size_t>(i)]));
    state.rng_explore.fill_normal(eps);
    state.audit.share_checks += 1;
    if (span_hash(z.data(), z.size()) != z_hash) state.audit.share_violations += 1;
    auto s = al.policy.sample_raw(obs[static_cast<std::size_t>(i)], z, eps);
    joint[static_cast<std::size_t>(i)] = std::move(s.action);
  }
  return joint;
}

std::vector<double> value_targets(const LearnerState& state, const Batch& batch,
                                  const BatchNoise& noise, int agent) {
  const BatchArrays arr = build_arrays(state, batch);
  const FreshActions fresh = sample_fresh(state, arr, noise, nullptr);
  return value_targets_impl(state, arr, fresh, agent, nullptr);
}

FreshActions sample_fresh_actions(const LearnerState& state, const Batch& batch,
                                  const BatchNoise& noise) {
  const BatchArrays arr = build_arrays(state, batch);
  return sample_fresh(state, arr, noise, nullptr);
}

LossBreakdown compute_losses(LearnerState& state, const Batch& batch, const BatchNoise& noise,
                             int agent, unsigned grad_mask, const FreshActions* fresh_in) {
  if (batch.items.empty()) throw std::invalid_argument("compute_losses: empty batch");
  if (agent < 0 || agent >= state.n_agents) {
    throw std::invalid_argument("compute_losses: agent out of range");
  }
  const BatchArrays arr = build_arrays(state, batch);
  const FreshActions fresh =
      fresh_in ? *fresh_in : sample_fresh(state, arr, noise, &state.audit);
  LossBreakdown out;
  if (state.cfg.algorithm != Algorithm::maddpg) {
    const auto vhat = value_targets_impl(state, arr, fresh, agent, &out.var_log_prob);
    out.value_loss = value_loss_pass(state, arr, vhat, agent, (grad_mask & kGradValue) != 0);
  }
  const auto qhat = bootstrap_targets(state, arr, agent);
  out.critic_loss = critic_loss_pass(state, arr, qhat, agent, (grad_mask & kGradCritic) != 0);
  const auto pol =
      policy_loss_pass(state, arr, noise, fresh, agent, (grad_mask & kGradPolicy) != 0);
  out.policy_loss = pol.loss;
  out.entropy = pol.entropy;
  if (pol.var_log_prob != 0.0) out.var_log_prob = pol.var_log_prob;
  return out;
}

std::optional<UpdateMetrics> update(LearnerState& state) {
  const int B = state.cfg.batch_size;
  if (state.buffer.size() < static_cast<std::size_t>(B)) return std::nullopt;

  const auto indices = state.buffer.sample_indices(static_cast<std::size_t>(B),
                                                   state.rng_sampler);
  const Batch batch = make_batch(state.buffer, indices);
  BatchNoise noise = draw_batch_noise(state, B);
  const BatchArrays arr = build_arrays(state, batch);
  const FreshActions fresh = sample_fresh(state, arr, noise, &state.audit);
  const bool maddpg = state.cfg.algorithm == Algorithm::maddpg;
  const bool var_on = !maddpg && state.cfg.beta != 0.0 && state.cfg.variational_coef != 0.0;

  UpdateMetrics metrics;

  // state-value and twin critics first
  for (int i = 0; i < state.n_agents; ++i) {
    auto& al = state.agents[static_cast<std::size_t>(i)];
    if (!maddpg) {
      double var_diag = 0.0;
      const auto vhat = value_targets_impl(state, arr, fresh, i, &var_diag);
      metrics.mean.value_loss += value_loss_pass(state, arr, vhat, i, true);
      clip_gradients(al.critics.v.params(), state.cfg.grad_clip);
      diff::adam_step(al.critics.v.params(), al.opt_v);
    }
    const auto qhat = bootstrap_targets(state, arr, i);
    metrics.mean.critic_loss += critic_loss_pass(state, arr, qhat, i, true);
    clip_gradients(al.critics.q1.params(), state.cfg.grad_clip);
    diff::adam_step(al.critics.q1.params(), al.opt_q1);
    if (!maddpg) {
      clip_gradients(al.critics.q2.params(), state.cfg.grad_clip);
      diff::adam_step(al.critics.q2.params(), al.opt_q2);
    }
  }

  // then policies (and predictors) against the refreshed critics, on the
  // configured delayed schedule
  const bool policy_pass = (state.updates + 1) % state.cfg.policy_update_every == 0;
  for (int i = 0; i < state.n_agents; ++i) {
    auto& al = state.agents[static_cast<std::size_t>(i)];
    const auto pol = policy_loss_pass(state, arr, noise, fresh, i, policy_pass);
    metrics.mean.policy_loss += pol.loss;
    metrics.mean.entropy += pol.entropy;
    metrics.mean.var_log_prob += pol.var_log_prob;
    if (policy_pass) {
      clip_gradients(al.policy.params(), state.cfg.grad_clip);
      diff::adam_step(al.policy.params(), al.opt_policy);
      if (var_on) {
        clip_gradients(al.predictor.params(), state.cfg.grad_clip);
        diff::adam_step(al.predictor.params(), al.opt_pred);
      } else {
        for (diff::Tensor* p : al.predictor.params()) p->zero_grad();
      }
      for (auto* p : al.critics.q1.params()) p->zero_grad();
    }
  }

  // target tracking
  for (int i = 0; i < state.n_agents; ++i) {
    auto& al = state.agents[static_cast<std::size_t>(i)];
    if (maddpg) {
      al.q1_target.soft_update_from(al.critics.q1, state.cfg.tau);
      al.policy_target.soft_update_from(al.policy, state.cfg.tau);
    } else {
      al.critics.soft_update(state.cfg.tau);
    }
  }

  state.updates += 1;
  metrics.updates = state.updates;
  const double inv = 1.0 / state.n_agents;
  metrics.mean.value_loss *= inv;
  metrics.mean.critic_loss *= inv;
  metrics.mean.policy_loss *= inv;
  metrics.mean.entropy *= inv;
  metrics.mean.var_log_prob *= inv;
  return metrics;
}

}  // namespace vmac::marl
