#include "vmac/marl/trainer.hpp"

#include <cmath>

namespace vmac::marl {

using nlohmann::json;

json MetricRecord::to_json() const {
  return json{{"step", step},
              {"seed", seed},
              {"mean_return", mean_return},
              {"std_return", std_return},
              {"losses",
               {{"v", value_loss}, {"q", critic_loss}, {"pi", policy_loss}}},
              {"entropy", entropy},
              {"mi_proxy", mi_proxy},
              {"updates", updates}};
}

namespace {

struct LossAccumulator {
  LossBreakdown sum;
  std::int64_t count = 0;

  void add(const LossBreakdown& l) {
    sum.value_loss += l.value_loss;
    sum.critic_loss += l.critic_loss;
    sum.policy_loss += l.policy_loss;
    sum.entropy += l.entropy;
    sum.var_log_prob += l.var_log_prob;
    ++count;
  }
  LossBreakdown mean() const {
    LossBreakdown m;
    if (count == 0) return m;
    const double inv = 1.0 / static_cast<double>(count);
    m.value_loss = sum.value_loss * inv;
    m.critic_loss = sum.critic_loss * inv;
    m.policy_loss = sum.policy_loss * inv;
    m.entropy = sum.entropy * inv;
    m.var_log_prob = sum.var_log_prob * inv;
    return m;
  }
  void reset() { *this = LossAccumulator{}; }
};

bool finite(const LossBreakdown& l) {
  return std::isfinite(l.value_loss) && std::isfinite(l.critic_loss) &&
         std::isfinite(l.policy_loss);
}

}  // namespace

TrainResult train(LearnerState& state, const TrainOptions& options) {
  TrainResult result;
  state.planned_steps = options.total_steps;
  LossAccumulator acc;

  auto policies = [&]() {
    std::vector<nets::GaussianPolicy> p;
    p.reserve(static_cast<std::size_t>(state.n_agents));
    for (const auto& a : state.agents) p.push_back(a.policy);
    return p;
  };

  auto run_eval = [&](std::int64_t at_step) {
    // one fixed evaluation suite per run: every eval point replays the same
    // episode layouts and noise so curves compare like for like
    const std::uint64_t eval_seed = derive_seed(state.master_seed, 0xE7A1);
    const EvalResult ev = evaluate_policies(policies(), *state.env, state.cfg.exec_latent_mode,
                                            options.eval_episodes, eval_seed,
                                            state.cfg.algorithm == Algorithm::maddpg);
    result.eval_audit.own_reads += ev.audit.own_reads;
    result.eval_audit.cross_reads += ev.audit.cross_reads;
    result.eval_audit.steps += ev.audit.steps;
    result.eval_audit.z_mismatches += ev.audit.z_mismatches;

    MetricRecord rec;
    rec.step = at_step;
    rec.seed = state.master_seed;
    rec.mean_return = ev.mean_return;
    rec.std_return = ev.std_return;
    const LossBreakdown mean = acc.mean();
    rec.value_loss = mean.value_loss;
    rec.critic_loss = mean.critic_loss;
    rec.policy_loss = mean.policy_loss;
    rec.entropy = mean.entropy;
    rec.mi_proxy = mean.var_log_prob;
    rec.updates = state.updates;
    acc.reset();
    result.metrics.push_back(rec);
    if (options.on_metric) options.on_metric(rec);
  };

  if (options.total_steps > 0) run_eval(0);
  std::int64_t next_eval = options.eval_interval;

  while (state.env_steps < options.total_steps) {
    auto obs = state.env->reset(state.rng_env.next_u64());
    while (true) {
      const auto actions = act_train(state, obs);
      const auto sr = state.env->step(actions);
      Transition t;
      t.obs = obs;
      t.actions = actions;
      t.reward = sr.reward;
      t.next_obs = sr.obs;
      t.terminal = sr.terminal;
      t.truncated = sr.truncated;
      state.buffer.push(std::move(t));
      obs = sr.obs;
      state.env_steps += 1;

      if (state.env_steps > state.cfg.warmup_steps &&
          state.env_steps % state.cfg.update_every == 0) {
        const auto m = update(state);
        if (m.has_value()) {
          if (!finite(m->mean)) {
            json diag{{"step", state.env_steps},
                      {"updates", state.updates},
                      {"losses",
                       {{"v", m->mean.value_loss},
                        {"q", m->mean.critic_loss},
                        {"pi", m->mean.policy_loss}}}};
            throw TrainAbort("non-finite loss at step " + std::to_string(state.env_steps),
                             std::move(diag));
          }
          acc.add(m->mean);
        }
      }

      const bool budget_done = state.env_steps >= options.total_steps;
      if (options.eval_interval > 0 && (state.env_steps >= next_eval || budget_done)) {
        run_eval(state.env_steps);
        while (next_eval <= state.env_steps) next_eval += options.eval_interval;
      }
      if (budget_done || sr.done()) break;
    }
  }

  result.audit = state.audit;
  result.env_steps = state.env_steps;
  result.updates = state.updates;
  return result;
}

}  // namespace vmac::marl
