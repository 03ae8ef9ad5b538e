#pragma once

#include <cstdint>

#include <json.hpp>

namespace vmac::verify {

struct VerifyOptions {
  std::uint64_t seed = 20240901;
  int mi_sweeps = 500;
  int lemma1_games = 100;
  int lemma2_games = 100;
  int bellman_iterations = 300;
  bool run_negative_control = true;
};

struct VerifyReport {
  nlohmann::json data;
  bool pass = false;
};

// Full oracle suite: mutual-information bound sweep with tightness check,
// exact policy-evaluation convergence and contraction measurements, the
// improvement-step inequality, op-level gradient checks, and a deliberately
// broken fixture (gamma > 1) that the contraction checker must flag.
VerifyReport run_verification(const VerifyOptions& opt);

}  // namespace vmac::verify
