#include "vmac/verify/mi.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace vmac::verify {

std::vector<double> DiscreteJoint::marginal_a() const {
  std::vector<double> m(static_cast<std::size_t>(na), 0.0);
  for (int a = 0; a < na; ++a) {
    for (int b = 0; b < nb; ++b) m[static_cast<std::size_t>(a)] += at(a, b);
  }
  return m;
}

std::vector<double> DiscreteJoint::marginal_b() const {
  std::vector<double> m(static_cast<std::size_t>(nb), 0.0);
  for (int a = 0; a < na; ++a) {
    for (int b = 0; b < nb; ++b) m[static_cast<std::size_t>(b)] += at(a, b);
  }
  return m;
}

void DiscreteJoint::validate() const {
  if (na < 1 || nb < 1 || p.size() != static_cast<std::size_t>(na) * nb) {
    throw std::invalid_argument("DiscreteJoint: shape/data mismatch");
  }
  double sum = 0.0;
  for (double v : p) {
    if (v < 0.0) throw std::invalid_argument("DiscreteJoint: negative probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw std::invalid_argument("DiscreteJoint: pmf sums to " + std::to_string(sum));
  }
}

void Conditional::validate_rows() const {
  if (n_cond < 1 || n_target < 1 || p.size() != static_cast<std::size_t>(n_cond) * n_target) {
    throw std::invalid_argument("Conditional: shape/data mismatch");
  }
  for (int c = 0; c < n_cond; ++c) {
    double row = 0.0;
    for (int t = 0; t < n_target; ++t) {
      if (at(c, t) < 0.0) throw std::invalid_argument("Conditional: negative probability");
      row += at(c, t);
    }
    if (std::abs(row - 1.0) > 1e-9) {
      throw std::invalid_argument("Conditional: row " + std::to_string(c) + " sums to " +
                                  std::to_string(row));
    }
  }
}

double entropy(const std::vector<double>& pmf) {
  double h = 0.0;
  for (double v : pmf) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

double brute_mi(const DiscreteJoint& joint) {
  joint.validate();
  const auto pa = joint.marginal_a();
  const auto pb = joint.marginal_b();
  double mi = 0.0;
  for (int a = 0; a < joint.na; ++a) {
    for (int b = 0; b < joint.nb; ++b) {
      const double pab = joint.at(a, b);
      if (pab > 0.0) {
        mi += pab * std::log(pab / (pa[static_cast<std::size_t>(a)] *
                                    pb[static_cast<std::size_t>(b)]));
      }
    }
  }
  return mi;
}

Conditional exact_conditional_b_given_a(const DiscreteJoint& joint) {
  const auto pa = joint.marginal_a();
  Conditional q;
  q.n_cond = joint.na;
  q.n_target = joint.nb;
  q.p.assign(static_cast<std::size_t>(joint.na) * joint.nb, 0.0);
  for (int a = 0; a < joint.na; ++a) {
    for (int b = 0; b < joint.nb; ++b) {
      q.p[static_cast<std::size_t>(a) * joint.nb + b] =
          pa[static_cast<std::size_t>(a)] > 0.0
              ? joint.at(a, b) / pa[static_cast<std::size_t>(a)]
              : 1.0 / joint.nb;
    }
  }
  return q;
}

Conditional exact_conditional_a_given_b(const DiscreteJoint& joint) {
  const auto pb = joint.marginal_b();
  Conditional q;
  q.n_cond = joint.nb;
  q.n_target = joint.na;
  q.p.assign(static_cast<std::size_t>(joint.nb) * joint.na, 0.0);
  for (int b = 0; b < joint.nb; ++b) {
    for (int a = 0; a < joint.na; ++a) {
      q.p[static_cast<std::size_t>(b) * joint.na + a] =
          pb[static_cast<std::size_t>(b)] > 0.0
              ? joint.at(a, b) / pb[static_cast<std::size_t>(b)]
              : 1.0 / joint.na;
    }
  }
  return q;
}

MiBounds mi_lower_bound(const DiscreteJoint& joint, const Conditional& q_b_given_a,
                        const Conditional& q_a_given_b) {
  joint.validate();
  if (q_b_given_a.n_cond != joint.na || q_b_given_a.n_target != joint.nb ||
      q_a_given_b.n_cond != joint.nb || q_a_given_b.n_target != joint.na) {
    throw std::invalid_argument("mi_lower_bound: conditional shapes do not match the joint");
  }
  q_b_given_a.validate_rows();
  q_a_given_b.validate_rows();

  const double ha = entropy(joint.marginal_a());
  const double hb = entropy(joint.marginal_b());
  double e_log_q_ba = 0.0;  // E log q(b|a)
  double e_log_q_ab = 0.0;  // E log q(a|b)
  for (int a = 0; a < joint.na; ++a) {
    for (int b = 0; b < joint.nb; ++b) {
      const double pab = joint.at(a, b);
      if (pab <= 0.0) continue;
      const double qba = q_b_given_a.at(a, b);
      const double qab = q_a_given_b.at(b, a);
      e_log_q_ba += pab * (qba > 0.0 ? std::log(qba)
                                     : -std::numeric_limits<double>::infinity());
      e_log_q_ab += pab * (qab > 0.0 ? std::log(qab)
                                     : -std::numeric_limits<double>::infinity());
    }
  }
  MiBounds out;
  out.one_sided = hb + e_log_q_ba;
  out.symmetrized = 0.5 * (ha + hb + e_log_q_ab + e_log_q_ba);
  return out;
}

DiscreteJoint random_joint(Rng& rng, int na, int nb) {
  DiscreteJoint j;
  j.na = na;
  j.nb = nb;
  j.p.resize(static_cast<std::size_t>(na) * nb);
  double sum = 0.0;
  for (double& v : j.p) {
    v = -std::log(1.0 - rng.uniform());  // exponential weights keep entries positive
    sum += v;
  }
  for (double& v : j.p) v /= sum;
  // exact renormalization so validate()'s 1e-12 budget always holds
  double s2 = 0.0;
  for (double v : j.p) s2 += v;
  j.p.back() += 1.0 - s2;
  return j;
}

Conditional random_conditional(Rng& rng, int n_cond, int n_target) {
  Conditional q;
  q.n_cond = n_cond;
  q.n_target = n_target;
  q.p.resize(static_cast<std::size_t>(n_cond) * n_target);
  for (int c = 0; c < n_cond; ++c) {
    double sum = 0.0;
    for (int t = 0; t < n_target; ++t) {
      double& v = q.p[static_cast<std::size_t>(c) * n_target + t];
      v = -std::log(1.0 - rng.uniform());
      sum += v;
    }
    for (int t = 0; t < n_target; ++t) {
      q.p[static_cast<std::size_t>(c) * n_target + t] /= sum;
    }
  }
  return q;
}

}  // namespace vmac::verify
