#include "vmac/verify/tabular.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace vmac::verify {

using envs::DiscreteGame;

// ---- TabularPolicy ----------------------------------------------------------

double TabularPolicy::prob(int agent, int s, int z, int a) const {
  const int na = action_counts[static_cast<std::size_t>(agent)];
  return tables[static_cast<std::size_t>(agent)]
               [(static_cast<std::size_t>(s) * n_latent + z) * na + a];
}

double& TabularPolicy::prob_ref(int agent, int s, int z, int a) {
  const int na = action_counts[static_cast<std::size_t>(agent)];
  return tables[static_cast<std::size_t>(agent)]
               [(static_cast<std::size_t>(s) * n_latent + z) * na + a];
}

void TabularPolicy::validate() const {
  if (n_states < 1 || n_agents < 1 || n_latent < 1) {
    throw std::invalid_argument("TabularPolicy: bad sizes");
  }
  if (static_cast<int>(action_counts.size()) != n_agents ||
      static_cast<int>(tables.size()) != n_agents ||
      static_cast<int>(latent_pmf.size()) != n_latent) {
    throw std::invalid_argument("TabularPolicy: table sizes do not match");
  }
  double zsum = 0.0;
  for (double v : latent_pmf) {
    if (v < 0.0) throw std::invalid_argument("TabularPolicy: negative latent probability");
    zsum += v;
  }
  if (std::abs(zsum - 1.0) > 1e-12) {
    throw std::invalid_argument("TabularPolicy: latent pmf not normalized");
  }
  for (int i = 0; i < n_agents; ++i) {
    const int na = action_counts[static_cast<std::size_t>(i)];
    if (tables[static_cast<std::size_t>(i)].size() !=
        static_cast<std::size_t>(n_states) * n_latent * na) {
      throw std::invalid_argument("TabularPolicy: agent table size mismatch");
    }
    for (int s = 0; s < n_states; ++s) {
      for (int z = 0; z < n_latent; ++z) {
        double row = 0.0;
        for (int a = 0; a < na; ++a) row += prob(i, s, z, a);
        if (std::abs(row - 1.0) > 1e-12) {
          throw std::invalid_argument("TabularPolicy: action row not normalized");
        }
      }
    }
  }
}

std::vector<double> TabularPolicy::joint_pmf(const DiscreteGame& game, int s) const {
  const int a_joint = game.joint_action_count();
  std::vector<double> out(static_cast<std::size_t>(a_joint), 0.0);
  for (int a = 0; a < a_joint; ++a) {
    const auto parts = game.split_joint(a);
    for (int z = 0; z < n_latent; ++z) {
      double p = latent_pmf[static_cast<std::size_t>(z)];
      for (int i = 0; i < n_agents && p > 0.0; ++i) {
        p *= prob(i, s, z, parts[static_cast<std::size_t>(i)]);
      }
      out[static_cast<std::size_t>(a)] += p;
    }
  }
  return out;
}

std::vector<double> TabularPolicy::marginal(int s, int agent) const {
  const int na = action_counts[static_cast<std::size_t>(agent)];
  std::vector<double> out(static_cast<std::size_t>(na), 0.0);
  for (int z = 0; z < n_latent; ++z) {
    for (int a = 0; a < na; ++a) {
      out[static_cast<std::size_t>(a)] +=
          latent_pmf[static_cast<std::size_t>(z)] * prob(agent, s, z, a);
    }
  }
  return out;
}

DiscreteJoint TabularPolicy::pair_marginal(int s, int i, int j) const {
  if (i == j) throw std::invalid_argument("pair_marginal: agents must differ");
  DiscreteJoint out;
  out.na = action_counts[static_cast<std::size_t>(i)];
  out.nb = action_counts[static_cast<std::size_t>(j)];
  out.p.assign(static_cast<std::size_t>(out.na) * out.nb, 0.0);
  for (int z = 0; z < n_latent; ++z) {
    const double pz = latent_pmf[static_cast<std::size_t>(z)];
    for (int a = 0; a < out.na; ++a) {
      for (int b = 0; b < out.nb; ++b) {
        out.at(a, b) += pz * prob(i, s, z, a) * prob(j, s, z, b);
      }
    }
  }
  // absorb the accumulated rounding so validate()'s 1e-12 budget holds
  double sum = 0.0;
  for (double v : out.p) sum += v;
  if (std::abs(sum - 1.0) > 1e-12) {
    for (double& v : out.p) v /= sum;
  }
  return out;
}

DiscreteJoint latent_marginal(const TabularPolicy& policy, int s, int i, int j) {
  return policy.pair_marginal(s, i, j);
}

// ---- TabularVariational -------------------------------------------------------

const Conditional& TabularVariational::q(int i, int j, int s) const {
  return cond[static_cast<std::size_t>(i) * n_agents + j][static_cast<std::size_t>(s)];
}

Conditional& TabularVariational::q_ref(int i, int j, int s) {
  return cond[static_cast<std::size_t>(i) * n_agents + j][static_cast<std::size_t>(s)];
}

double TabularVariational::log_pair(int i, int j, int s, int a_i, int a_j) const {
  const double q_ij = q(i, j, s).at(a_i, a_j);  // q(a_j | a_i, s)
  const double q_ji = q(j, i, s).at(a_j, a_i);  // q(a_i | a_j, s)
  if (q_ij <= 0.0 || q_ji <= 0.0) {
    return -std::numeric_limits<double>::infinity();
  }
  return std::log(q_ij) + std::log(q_ji);
}

// ---- exact evaluation -----------------------------------------------------------

namespace {

// Augmented per-state expected reward for `agent`:
//   E_pi[r] + beta * H(marginal_i) + (beta / N) * sum_{j != i} E_pi[log q^(i,j)]
std::vector<double> augmented_reward(const DiscreteGame& game, const TabularPolicy& policy,
                                     const TabularVariational& q, double beta, int agent) {
  const int a_joint = game.joint_action_count();
  std::vector<double> out(static_cast<std::size_t>(game.n_states), 0.0);
  for (int s = 0; s < game.n_states; ++s) {
    const auto joint = policy.joint_pmf(game, s);
    double r = 0.0;
    for (int a = 0; a < a_joint; ++a) {
      r += joint[static_cast<std::size_t>(a)] * game.rew(s, a);
    }
    if (beta != 0.0) {
      r += beta * entropy(policy.marginal(s, agent));
      double pred = 0.0;
      for (int j = 0; j < game.n_agents; ++j) {
        if (j == agent) continue;
        const auto pair = policy.pair_marginal(s, agent, j);
        for (int ai = 0; ai < pair.na; ++ai) {
          for (int aj = 0; aj < pair.nb; ++aj) {
            const double p = pair.at(ai, aj);
            if (p <= 0.0) continue;
            const double lq = q.log_pair(agent, j, s, ai, aj);
            if (!std::isfinite(lq)) {
              throw std::invalid_argument(
                  "exact_value: variational table has zero mass on the policy support");
            }
            pred += p * lq;
          }
        }
      }
      r += beta / game.n_agents * pred;
    }
    out[static_cast<std::size_t>(s)] = r;
  }
  return out;
}

// Gaussian elimination with partial pivoting; a is n x n row-major, b length n.
std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b) {
  const int n = static_cast<int>(b.size());
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    double best = std::abs(a[static_cast<std::size_t>(col) * n + col]);
    for (int r = col + 1; r < n; ++r) {
      const double v = std::abs(a[static_cast<std::size_t>(r) * n + col]);
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best < 1e-14) throw std::invalid_argument("solve_linear: singular system");
    if (pivot != col) {
      for (int c = 0; c < n; ++c) {
        std::swap(a[static_cast<std::size_t>(pivot) * n + c],
                  a[static_cast<std::size_t>(col) * n + c]);
      }
      std::swap(b[static_cast<std::size_t>(pivot)], b[static_cast<std::size_t>(col)]);
    }
    const double inv = 1.0 / a[static_cast<std::size_t>(col) * n + col];
    for (int r = col + 1; r < n; ++r) {
      const double f = a[static_cast<std::size_t>(r) * n + col] * inv;
      if (f == 0.0) continue;
      for (int c = col; c < n; ++c) {
        a[static_cast<std::size_t>(r) * n + c] -= f * a[static_cast<std::size_t>(col) * n + c];
      }
      b[static_cast<std::size_t>(r)] -= f * b[static_cast<std::size_t>(col)];
    }
  }
  std::vector<double> x(static_cast<std::size_t>(n), 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double acc = b[static_cast<std::size_t>(r)];
    for (int c = r + 1; c < n; ++c) {
      acc -= a[static_cast<std::size_t>(r) * n + c] * x[static_cast<std::size_t>(c)];
    }
    x[static_cast<std::size_t>(r)] = acc / a[static_cast<std::size_t>(r) * n + r];
  }
  return x;
}

}  // namespace

ValueResult exact_value(const DiscreteGame& game, const TabularPolicy& policy,
                        const TabularVariational& q, double beta, int agent) {
  game.validate();
  policy.validate();
  if (!(game.gamma < 1.0)) {
    throw std::invalid_argument("exact_value: gamma must be below one");
  }
  const int n = game.n_states;
  const int a_joint = game.joint_action_count();
  const auto r_pi = augmented_reward(game, policy, q, beta, agent);

  // (I - gamma * P_pi) V = r_pi
  std::vector<double> m(static_cast<std::size_t>(n) * n, 0.0);
  for (int s = 0; s < n; ++s) {
    const auto joint = policy.joint_pmf(game, s);
    for (int s2 = 0; s2 < n; ++s2) {
      double p = 0.0;
      for (int a = 0; a < a_joint; ++a) {
        p += joint[static_cast<std::size_t>(a)] * game.trans(s, a, s2);
      }
      m[static_cast<std::size_t>(s) * n + s2] = (s == s2 ? 1.0 : 0.0) - game.gamma * p;
    }
  }
  ValueResult out;
  out.v = solve_linear(std::move(m), r_pi);
  out.q.assign(static_cast<std::size_t>(n) * a_joint, 0.0);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < a_joint; ++a) {
      double next = 0.0;
      for (int s2 = 0; s2 < n; ++s2) {
        next += game.trans(s, a, s2) * out.v[static_cast<std::size_t>(s2)];
      }
      out.q[static_cast<std::size_t>(s) * a_joint + a] = game.rew(s, a) + game.gamma * next;
    }
  }
  return out;
}

std::vector<double> bellman_apply(const DiscreteGame& game, const TabularPolicy& policy,
                                  const TabularVariational& q, double beta, int agent,
                                  const std::vector<double>& q_table) {
  const int n = game.n_states;
  const int a_joint = game.joint_action_count();
  if (q_table.size() != static_cast<std::size_t>(n) * a_joint) {
    throw std::invalid_argument("bellman_apply: Q table size mismatch");
  }
  // V(s) = E_a[ Q(s, a) - beta * log marginal_i(a_i | s) + (beta/N) sum_j log q^(i,j) ]
  std::vector<double> v(static_cast<std::size_t>(n), 0.0);
  for (int s = 0; s < n; ++s) {
    const auto joint = policy.joint_pmf(game, s);
    const auto marg = policy.marginal(s, agent);
    double acc = 0.0;
    for (int a = 0; a < a_joint; ++a) {
      const double p = joint[static_cast<std::size_t>(a)];
      if (p <= 0.0) continue;
      const auto parts = game.split_joint(a);
      double term = q_table[static_cast<std::size_t>(s) * a_joint + a];
      if (beta != 0.0) {
        term -= beta * std::log(marg[static_cast<std::size_t>(
                    parts[static_cast<std::size_t>(agent)])]);
        double pred = 0.0;
        for (int j = 0; j < game.n_agents; ++j) {
          if (j == agent) continue;
          pred += q.log_pair(agent, j, s, parts[static_cast<std::size_t>(agent)],
                             parts[static_cast<std::size_t>(j)]);
        }
        term += beta / game.n_agents * pred;
      }
      acc += p * term;
    }
    v[static_cast<std::size_t>(s)] = acc;
  }
  std::vector<double> out(static_cast<std::size_t>(n) * a_joint, 0.0);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < a_joint; ++a) {
      double next = 0.0;
      for (int s2 = 0; s2 < n; ++s2) {
        next += game.trans(s, a, s2) * v[static_cast<std::size_t>(s2)];
      }
      out[static_cast<std::size_t>(s) * a_joint + a] = game.rew(s, a) + game.gamma * next;
    }
  }
  return out;
}

// ---- improvement ----------------------------------------------------------------

namespace {

// Objective of Eq-style improvement at state s for a candidate slice of the
// improved agent: rows[z][a] is the candidate pi_i(a | s, z).
double state_objective(const DiscreteGame& game, const TabularPolicy& policy, int agent, int s,
                       const std::vector<std::vector<double>>& rows, double beta,
                       const std::vector<double>& q_old_row,
                       std::vector<Conditional>* out_cond_ij,
                       std::vector<Conditional>* out_cond_ji) {
  const int a_joint = game.joint_action_count();
  const int na = game.action_counts[static_cast<std::size_t>(agent)];

  // candidate joint at s
  std::vector<double> joint(static_cast<std::size_t>(a_joint), 0.0);
  for (int a = 0; a < a_joint; ++a) {
    const auto parts = game.split_joint(a);
    for (int z = 0; z < policy.n_latent; ++z) {
      double p = policy.latent_pmf[static_cast<std::size_t>(z)];
      for (int i = 0; i < game.n_agents && p > 0.0; ++i) {
        const int ai = parts[static_cast<std::size_t>(i)];
        p *= (i == agent) ? rows[static_cast<std::size_t>(z)][static_cast<std::size_t>(ai)]
                          : policy.prob(i, s, z, ai);
      }
      joint[static_cast<std::size_t>(a)] += p;
    }
  }

  double obj = 0.0;
  for (int a = 0; a < a_joint; ++a) {
    obj += joint[static_cast<std::size_t>(a)] * q_old_row[static_cast<std::size_t>(a)];
  }

  if (beta != 0.0) {
    // entropy of the candidate's own marginal
    std::vector<double> marg(static_cast<std::size_t>(na), 0.0);
    for (int z = 0; z < policy.n_latent; ++z) {
      for (int a = 0; a < na; ++a) {
        marg[static_cast<std::size_t>(a)] += policy.latent_pmf[static_cast<std::size_t>(z)] *
                                             rows[static_cast<std::size_t>(z)]
                                                 [static_cast<std::size_t>(a)];
      }
    }
    obj += beta * entropy(marg);

    // best-response variational tables are the exact conditionals of the
    // candidate pair marginals; their contribution is the plug-in value
    for (int j = 0; j < game.n_agents; ++j) {
      if (j == agent) continue;
      const int nj = game.action_counts[static_cast<std::size_t>(j)];
      DiscreteJoint pair;
      pair.na = na;
      pair.nb = nj;
      pair.p.assign(static_cast<std::size_t>(na) * nj, 0.0);
      for (int z = 0; z < policy.n_latent; ++z) {
        const double pz = policy.latent_pmf[static_cast<std::size_t>(z)];
        for (int a = 0; a < na; ++a) {
          for (int b = 0; b < nj; ++b) {
            pair.at(a, b) += pz * rows[static_cast<std::size_t>(z)][static_cast<std::size_t>(a)] *
                             policy.prob(j, s, z, b);
          }
        }
      }
      Conditional q_ij = exact_conditional_b_given_a(pair);  // q(a_j | a_i)
      Conditional q_ji = exact_conditional_a_given_b(pair);  // q(a_i | a_j)
      double pred = 0.0;
      for (int a = 0; a < na; ++a) {
        for (int b = 0; b < nj; ++b) {
          const double p = pair.at(a, b);
          if (p <= 0.0) continue;
          pred += p * (std::log(q_ij.at(a, b)) + std::log(q_ji.at(b, a)));
        }
      }
      obj += beta / game.n_agents * pred;
      if (out_cond_ij) out_cond_ij->push_back(std::move(q_ij));
      if (out_cond_ji) out_cond_ji->push_back(std::move(q_ji));
    }
  }
  return obj;
}

}  // namespace

ImprovementResult improvement_step(const DiscreteGame& game, const TabularPolicy& policy,
                                   const TabularVariational& q, double beta, int agent) {
  game.validate();
  policy.validate();
  if (agent < 0 || agent >= game.n_agents) {
    throw std::invalid_argument("improvement_step: agent out of range");
  }
  const int na = game.action_counts[static_cast<std::size_t>(agent)];
  const int nz = policy.n_latent;
  if (na < 1 || nz < 1) throw std::invalid_argument("improvement_step: empty candidate set");
  const int a_joint = game.joint_action_count();

  const ValueResult old_val = exact_value(game, policy, q, beta, agent);

  ImprovementResult res;
  res.policy = policy;
  res.q = q;

  for (int s = 0; s < game.n_states; ++s) {
    std::vector<double> q_old_row(old_val.q.begin() + static_cast<std::ptrdiff_t>(s) * a_joint,
                                  old_val.q.begin() +
                                      static_cast<std::ptrdiff_t>(s + 1) * a_joint);

    // current slice first so ties keep the present policy
    std::vector<std::vector<double>> best_rows(static_cast<std::size_t>(nz));
    for (int z = 0; z < nz; ++z) {
      best_rows[static_cast<std::size_t>(z)].resize(static_cast<std::size_t>(na));
      for (int a = 0; a < na; ++a) {
        best_rows[static_cast<std::size_t>(z)][static_cast<std::size_t>(a)] =
            policy.prob(agent, s, z, a);
      }
    }
    double best_obj =
        state_objective(game, policy, agent, s, best_rows, beta, q_old_row, nullptr, nullptr);
    bool switched = false;

    // every deterministic map z -> action
    std::vector<int> assign(static_cast<std::size_t>(nz), 0);
    long long n_cands = 1;
    for (int z = 0; z < nz; ++z) n_cands *= na;
    for (long long c = 0; c < n_cands; ++c) {
      long long rem = c;
      for (int z = 0; z < nz; ++z) {
        assign[static_cast<std::size_t>(z)] = static_cast<int>(rem % na);
        rem /= na;
      }
      std::vector<std::vector<double>> rows(static_cast<std::size_t>(nz),
                                            std::vector<double>(static_cast<std::size_t>(na), 0.0));
      for (int z = 0; z < nz; ++z) {
        rows[static_cast<std::size_t>(z)][static_cast<std::size_t>(assign[static_cast<std::size_t>(z)])] = 1.0;
      }
      const double obj =
          state_objective(game, policy, agent, s, rows, beta, q_old_row, nullptr, nullptr);
      if (obj > best_obj + 1e-15) {
        best_obj = obj;
        best_rows = rows;
        switched = true;
      }
    }

    if (switched) {
      res.changed = true;
      for (int z = 0; z < nz; ++z) {
        for (int a = 0; a < na; ++a) {
          res.policy.prob_ref(agent, s, z, a) =
              best_rows[static_cast<std::size_t>(z)][static_cast<std::size_t>(a)];
        }
      }
    }
  }

  // re-derive the conditionals of every pair involving `agent` from the new
  // policy (exact conditionals maximize the expected log terms)
  for (int s = 0; s < game.n_states; ++s) {
    for (int j = 0; j < game.n_agents; ++j) {
      if (j == agent) continue;
      const DiscreteJoint pair = res.policy.pair_marginal(s, agent, j);
      res.q.q_ref(agent, j, s) = exact_conditional_b_given_a(pair);
      res.q.q_ref(j, agent, s) = exact_conditional_a_given_b(pair);
    }
  }

  const ValueResult new_val = exact_value(game, res.policy, res.q, beta, agent);
  res.min_delta_q = std::numeric_limits<double>::infinity();
  res.max_delta_q = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < new_val.q.size(); ++k) {
    const double d = new_val.q[k] - old_val.q[k];
    res.min_delta_q = std::min(res.min_delta_q, d);
    res.max_delta_q = std::max(res.max_delta_q, d);
  }
  return res;
}

// ---- fixtures -----------------------------------------------------------------

envs::DiscreteGame random_game(Rng& rng, int n_states, std::vector<int> action_counts,
                               double gamma, double reward_scale) {
  envs::DiscreteGame g;
  g.n_states = n_states;
  g.n_agents = static_cast<int>(action_counts.size());
  g.action_counts = std::move(action_counts);
  g.gamma = gamma;
  const int a_joint = g.joint_action_count();
  g.transition.resize(static_cast<std::size_t>(n_states) * a_joint * n_states);
  g.reward.resize(static_cast<std::size_t>(n_states) * a_joint);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < a_joint; ++a) {
      double sum = 0.0;
      std::vector<double> row(static_cast<std::size_t>(n_states));
      for (double& v : row) {
        v = -std::log(1.0 - rng.uniform());
        sum += v;
      }
      double acc = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) {
        row[static_cast<std::size_t>(s2)] /= sum;
        acc += row[static_cast<std::size_t>(s2)];
      }
      row.back() += 1.0 - acc;
      const std::size_t base = (static_cast<std::size_t>(s) * a_joint + a) * n_states;
      for (int s2 = 0; s2 < n_states; ++s2) {
        g.transition[base + s2] = row[static_cast<std::size_t>(s2)];
      }
      g.reward[static_cast<std::size_t>(s) * a_joint + a] =
          rng.uniform(-reward_scale, reward_scale);
    }
  }
  return g;
}

TabularPolicy random_policy(Rng& rng, const envs::DiscreteGame& game, int n_latent) {
  TabularPolicy p;
  p.n_states = game.n_states;
  p.n_agents = game.n_agents;
  p.n_latent = n_latent;
  p.action_counts = game.action_counts;
  p.latent_pmf.resize(static_cast<std::size_t>(n_latent));
  double zsum = 0.0;
  for (double& v : p.latent_pmf) {
    v = -std::log(1.0 - rng.uniform());
    zsum += v;
  }
  double zacc = 0.0;
  for (double& v : p.latent_pmf) {
    v /= zsum;
    zacc += v;
  }
  p.latent_pmf.back() += 1.0 - zacc;

  p.tables.resize(static_cast<std::size_t>(game.n_agents));
  for (int i = 0; i < game.n_agents; ++i) {
    const int na = game.action_counts[static_cast<std::size_t>(i)];
    p.tables[static_cast<std::size_t>(i)].resize(
        static_cast<std::size_t>(game.n_states) * n_latent * na);
    for (int s = 0; s < game.n_states; ++s) {
      for (int z = 0; z < n_latent; ++z) {
        double sum = 0.0;
        for (int a = 0; a < na; ++a) {
          double v = -std::log(1.0 - rng.uniform());
          p.prob_ref(i, s, z, a) = v;
          sum += v;
        }
        double acc = 0.0;
        for (int a = 0; a < na; ++a) {
          p.prob_ref(i, s, z, a) /= sum;
          acc += p.prob(i, s, z, a);
        }
        p.prob_ref(i, s, z, na - 1) += 1.0 - acc;
      }
    }
  }
  return p;
}

TabularVariational random_variational(Rng& rng, const envs::DiscreteGame& game) {
  TabularVariational q;
  q.n_agents = game.n_agents;
  q.n_states = game.n_states;
  q.cond.resize(static_cast<std::size_t>(game.n_agents) * game.n_agents);
  for (int i = 0; i < game.n_agents; ++i) {
    for (int j = 0; j < game.n_agents; ++j) {
      if (i == j) continue;
      auto& per_state = q.cond[static_cast<std::size_t>(i) * game.n_agents + j];
      per_state.resize(static_cast<std::size_t>(game.n_states));
      for (int s = 0; s < game.n_states; ++s) {
        per_state[static_cast<std::size_t>(s)] =
            random_conditional(rng, game.action_counts[static_cast<std::size_t>(i)],
                               game.action_counts[static_cast<std::size_t>(j)]);
      }
    }
  }
  return q;
}

TabularVariational conditionals_of(const TabularPolicy& policy) {
  TabularVariational q;
  q.n_agents = policy.n_agents;
  q.n_states = policy.n_states;
  q.cond.resize(static_cast<std::size_t>(policy.n_agents) * policy.n_agents);
  for (int i = 0; i < policy.n_agents; ++i) {
    for (int j = 0; j < policy.n_agents; ++j) {
      if (i == j) continue;
      auto& per_state = q.cond[static_cast<std::size_t>(i) * policy.n_agents + j];
      per_state.resize(static_cast<std::size_t>(policy.n_states));
      for (int s = 0; s < policy.n_states; ++s) {
        per_state[static_cast<std::size_t>(s)] =
            exact_conditional_b_given_a(policy.pair_marginal(s, i, j));
      }
    }
  }
  return q;
}

}  // namespace vmac::verify
