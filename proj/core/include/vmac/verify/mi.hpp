#pragma once

#include <vector>

#include "vmac/rng.hpp"

namespace vmac::verify {

// Joint pmf over one agent pair's actions at a fixed state. Entry (a, b) is
// p(first agent takes a, second takes b).
struct DiscreteJoint {
  int na = 0;
  int nb = 0;
  std::vector<double> p;  // row-major [na, nb]

  double& at(int a, int b) { return p[static_cast<std::size_t>(a) * nb + b]; }
  double at(int a, int b) const { return p[static_cast<std::size_t>(a) * nb + b]; }
  std::vector<double> marginal_a() const;
  std::vector<double> marginal_b() const;
  // entries >= 0 and summing to 1 within 1e-12, else throws
  void validate() const;
};

// Conditional pmf table: row `c` is a distribution over the target alphabet.
struct Conditional {
  int n_cond = 0;
  int n_target = 0;
  std::vector<double> p;  // row-major [n_cond, n_target]

  double at(int c, int t) const { return p[static_cast<std::size_t>(c) * n_target + t]; }
  void validate_rows() const;  // each row normalized within 1e-9
};

// Entropy of a pmf in nats, with 0 log 0 = 0.
double entropy(const std::vector<double>& pmf);

// Exact mutual information sum_{a,b} p(a,b) log( p(a,b) / (p(a) p(b)) ),
// natural log; zero for product distributions.
double brute_mi(const DiscreteJoint& joint);

// Exact conditionals of the joint: q(b | a) and q(a | b). Rows conditioned on
// zero-probability outcomes fall back to uniform.
Conditional exact_conditional_b_given_a(const DiscreteJoint& joint);
Conditional exact_conditional_a_given_b(const DiscreteJoint& joint);

struct MiBounds {
  double one_sided = 0.0;    // H(b) + E log q(b|a)
  double symmetrized = 0.0;  // (H(a) + H(b) + E[log q(a|b) + log q(b|a)]) / 2
};

// Variational lower bounds on brute_mi. Both hold for any row-normalized q
// and are tight when q equals the exact conditionals.
MiBounds mi_lower_bound(const DiscreteJoint& joint, const Conditional& q_b_given_a,
                        const Conditional& q_a_given_b);

DiscreteJoint random_joint(Rng& rng, int na, int nb);
Conditional random_conditional(Rng& rng, int n_cond, int n_target);

}  // namespace vmac::verify
