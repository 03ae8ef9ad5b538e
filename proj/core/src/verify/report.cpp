#include "vmac/verify/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vmac/diff/tape.hpp"
#include "vmac/verify/gradcheck.hpp"
#include "vmac/verify/mi.hpp"
#include "vmac/verify/tabular.hpp"

namespace vmac::verify {

using nlohmann::json;

namespace {

double sup_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

json mi_sweep(Rng& rng, int sweeps) {
  double worst_violation = -std::numeric_limits<double>::infinity();  // bound - MI
  double worst_tightness = 0.0;                                       // |bound - MI| with exact q
  for (int it = 0; it < sweeps; ++it) {
    const int na = 2 + rng.uniform_int(5);
    const int nb = 2 + rng.uniform_int(5);
    const DiscreteJoint joint = random_joint(rng, na, nb);
    const double mi = brute_mi(joint);

    const Conditional q_ba = random_conditional(rng, na, nb);
    const Conditional q_ab = random_conditional(rng, nb, na);
    const MiBounds loose = mi_lower_bound(joint, q_ba, q_ab);
    worst_violation = std::max({worst_violation, loose.symmetrized - mi, loose.one_sided - mi});

    const MiBounds tight =
        mi_lower_bound(joint, exact_conditional_b_given_a(joint), exact_conditional_a_given_b(joint));
    worst_tightness = std::max(worst_tightness, std::abs(tight.symmetrized - mi));
    worst_tightness = std::max(worst_tightness, std::abs(tight.one_sided - mi));
  }
  json out;
  out["sweeps"] = sweeps;
  out["worst_bound_minus_mi"] = worst_violation;
  out["max_bound_violation"] = std::max(0.0, worst_violation - 1e-9);
  out["worst_exact_q_gap"] = worst_tightness;
  out["pass"] = worst_violation <= 1e-9 && worst_tightness < 1e-12;
  return out;
}

struct ContractionStats {
  double worst_excess = -std::numeric_limits<double>::infinity();  // ratio - gamma
  std::vector<int> histogram;  // ratio / gamma in [0, 1], 20 bins plus overflow
  ContractionStats() : histogram(21, 0) {}
  void record(double ratio, double gamma) {
    worst_excess = std::max(worst_excess, ratio - gamma);
    const double rel = gamma > 0.0 ? ratio / gamma : 0.0;
    int bin = static_cast<int>(rel * 20.0);
    bin = std::clamp(bin, 0, 20);
    histogram[static_cast<std::size_t>(bin)] += 1;
  }
};

// Measures contraction ratios of the augmented Bellman operator on random Q
// pairs; with check_theorem, also iterates the operator and compares against
// the geometric convergence guarantee.
json lemma1_sweep(Rng& rng, int n_games, int iterations) {
  const double gammas[] = {0.5, 0.9, 0.99};
  ContractionStats stats;
  double worst_excess_over_bound = -std::numeric_limits<double>::infinity();
  double worst_fp_gap = 0.0;  // distance of iterate to linear-solve fixed point
  json per_gamma = json::array();

  for (double gamma : gammas) {
    double fp_worst = 0.0;
    double bound_excess = -std::numeric_limits<double>::infinity();
    for (int g = 0; g < n_games; ++g) {
      const int n_states = 2 + rng.uniform_int(3);
      const std::vector<int> acts = {2 + rng.uniform_int(2), 2 + rng.uniform_int(2)};
      const envs::DiscreteGame game = random_game(rng, n_states, acts, gamma);
      const TabularPolicy policy = random_policy(rng, game, 1 + rng.uniform_int(2));
      const TabularVariational q = random_variational(rng, game);
      const double beta = rng.uniform(0.0, 0.5);
      const int agent = rng.uniform_int(2);

      const ValueResult exact = exact_value(game, policy, q, beta, agent);

      // contraction ratios: a random pair plus a constant-offset pair, which
      // attains the operator norm exactly
      const std::size_t sz = exact.q.size();
      std::vector<double> qa(sz), qb(sz);
      for (std::size_t k = 0; k < sz; ++k) {
        qa[k] = rng.uniform(-5.0, 5.0);
        qb[k] = rng.uniform(-5.0, 5.0);
      }
      const double before = sup_dist(qa, qb);
      const double after = sup_dist(bellman_apply(game, policy, q, beta, agent, qa),
                                    bellman_apply(game, policy, q, beta, agent, qb));
      if (before > 0.0) stats.record(after / before, gamma);
      const double offset = rng.uniform(0.5, 2.0);
      std::vector<double> qc(sz);
      for (std::size_t k = 0; k < sz; ++k) qc[k] = qa[k] + offset;
      const double after_c = sup_dist(bellman_apply(game, policy, q, beta, agent, qa),
                                      bellman_apply(game, policy, q, beta, agent, qc));
      stats.record(after_c / offset, gamma);

      // geometric convergence toward the linear-solve fixed point
      std::vector<double> it(sz, 0.0);
      const double initial_gap = sup_dist(it, exact.q);
      for (int k = 0; k < iterations; ++k) {
        it = bellman_apply(game, policy, q, beta, agent, it);
      }
      const double gap = sup_dist(it, exact.q);
      const double guarantee = std::pow(gamma, iterations) * initial_gap;
      fp_worst = std::max(fp_worst, gap);
      bound_excess = std::max(bound_excess, gap - (guarantee + 1e-9));
    }
    per_gamma.push_back({{"gamma", gamma},
                         {"worst_fixed_point_gap", fp_worst},
                         {"worst_excess_over_geometric_bound", bound_excess}});
    worst_fp_gap = std::max(worst_fp_gap, fp_worst);
    worst_excess_over_bound = std::max(worst_excess_over_bound, bound_excess);
  }

  json out;
  out["games_per_gamma"] = n_games;
  out["iterations"] = iterations;
  out["worst_contraction_excess"] = stats.worst_excess;
  out["contraction_ratio_histogram"] = stats.histogram;
  out["per_gamma"] = per_gamma;
  out["worst_fixed_point_gap"] = worst_fp_gap;
  // the theorem guarantees gamma^k * initial gap; the sweep must stay within it
  out["pass"] = stats.worst_excess <= 1e-12 && worst_excess_over_bound <= 0.0;
  return out;
}

json lemma2_sweep(Rng& rng, int n_games) {
  double worst = std::numeric_limits<double>::infinity();
  int counterexamples = 0;
  for (int g = 0; g < n_games; ++g) {
    const int n_states = 1 + rng.uniform_int(2);
    const std::vector<int> acts = {2, 2};
    const double gamma = rng.uniform(0.3, 0.95);
    const envs::DiscreteGame game = random_game(rng, n_states, acts, gamma);
    const TabularPolicy policy = random_policy(rng, game, 1 + rng.uniform_int(2));
    const TabularVariational q = random_variational(rng, game);
    const double beta = rng.uniform(0.0, 0.5);
    const ImprovementResult res = improvement_step(game, policy, q, beta, rng.uniform_int(2));
    worst = std::min(worst, res.min_delta_q);
    if (res.min_delta_q < -1e-10) ++counterexamples;
  }
  json out;
  out["games"] = n_games;
  out["worst_min_delta_q"] = worst;
  out["counterexamples"] = counterexamples;
  out["pass"] = counterexamples == 0;
  return out;
}

json gradient_checks(Rng& rng) {
  using namespace vmac::diff;
  double worst_rel = 0.0, worst_abs = 0.0;

  // a compound expression exercising every differentiable op kind
  auto uniform_tensor = [&](diff::Shape shape, double lo, double hi) {
    Tensor t = Tensor::zeros(std::move(shape), true);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
  };
  Tensor w = uniform_tensor({3, 4}, -1.0, 1.0);
  Tensor bvec = uniform_tensor({4}, -1.0, 1.0);
  Tensor x = uniform_tensor({2, 3}, 0.5, 1.5);

  auto build = [&](Tape& tape) -> Value {
    Value xv = tape.leaf(x);
    Value h = add(matmul(xv, tape.leaf(w)), tape.leaf(bvec));
    Value t = tanh(h);
    Value r = relu(add_scalar(h, 0.3));
    Value e = exp(scale(h, 0.25));
    Value lg = log(add_scalar(square(t), 1.0));
    Value mixed = add(mul(t, r), sub(e, lg));
    Value body = concat(mixed, neg(minimum(t, r)));
    Value g = gaussian_log_prob(t, scale(r, 0.1), clamp(h, -2.0, 1.9));
    return add(mean(body), scale(sum(g), 0.01));
  };

  {
    Tape tape;
    Value loss = build(tape);
    tape.backward(loss);
    std::vector<Tensor*> params = {&w, &bvec, &x};
    auto res = finite_diff_check(params, [&]() {
      Tape t2;
      return build(t2).item();
    });
    worst_rel = std::max(worst_rel, res.max_rel_err);
    worst_abs = std::max(worst_abs, res.max_abs_err);
  }

  json out;
  out["worst_rel_err"] = worst_rel;
  out["worst_abs_err_near_zero"] = worst_abs;
  out["pass"] = worst_rel < 1e-4 && worst_abs < 1e-6;
  return out;
}

// A gamma > 1 fixture must trip the contraction check; the suite passes only
// if the checker catches it.
json negative_control(Rng& rng) {
  envs::DiscreteGame game = random_game(rng, 3, {2, 2}, 0.9);
  game.gamma = 1.2;  // deliberately invalid; bypasses validate()
  const TabularPolicy policy = random_policy(rng, game, 1);
  const TabularVariational q = random_variational(rng, game);

  const std::size_t sz = static_cast<std::size_t>(game.n_states) * game.joint_action_count();
  double worst_ratio = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> qa(sz), qc(sz);
    const double offset = rng.uniform(0.5, 2.0);
    for (std::size_t k = 0; k < sz; ++k) {
      qa[k] = rng.uniform(-5.0, 5.0);
      qc[k] = qa[k] + offset;
    }
    const double after = sup_dist(bellman_apply(game, policy, q, 0.1, 0, qa),
                                  bellman_apply(game, policy, q, 0.1, 0, qc));
    worst_ratio = std::max(worst_ratio, after / offset);
  }
  json out;
  out["gamma"] = game.gamma;
  out["worst_ratio"] = worst_ratio;
  out["tripped"] = worst_ratio > 1.0;
  out["pass"] = worst_ratio > 1.0;
  return out;
}

}  // namespace

VerifyReport run_verification(const VerifyOptions& opt) {
  Rng rng(opt.seed);
  VerifyReport rep;
  rep.data["seed"] = opt.seed;
  rep.data["mi_bounds"] = mi_sweep(rng, opt.mi_sweeps);
  rep.data["policy_evaluation"] = lemma1_sweep(rng, opt.lemma1_games, opt.bellman_iterations);
  rep.data["policy_improvement"] = lemma2_sweep(rng, opt.lemma2_games);
  rep.data["gradients"] = gradient_checks(rng);
  if (opt.run_negative_control) {
    rep.data["negative_control"] = negative_control(rng);
  }
  bool pass = true;
  for (const auto& key :
       {"mi_bounds", "policy_evaluation", "policy_improvement", "gradients"}) {
    pass = pass && rep.data[key]["pass"].get<bool>();
  }
  if (opt.run_negative_control) {
    pass = pass && rep.data["negative_control"]["pass"].get<bool>();
  }
  rep.pass = pass;
  rep.data["pass"] = pass;
  return rep;
}

}  // namespace vmac::verify
