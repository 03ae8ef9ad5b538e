#include <doctest.h>

#include <cmath>
#include <set>

#include "vmac/envs/coop_nav.hpp"
#include "vmac/envs/discrete_game.hpp"
#include "vmac/envs/factory.hpp"
#include "vmac/envs/predator_prey.hpp"
#include "vmac/rng.hpp"

using namespace vmac;
using envs::CoopNavConfig;
using envs::CoopNavEnv;
using envs::PredatorPreyConfig;
using envs::PredatorPreyEnv;

TEST_SUITE_BEGIN("envs");

namespace {

envs::JointAction random_actions(Rng& rng, const envs::MarkovGameEnv& env) {
  envs::JointAction a(static_cast<std::size_t>(env.n_agents()));
  for (int i = 0; i < env.n_agents(); ++i) {
    a[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(env.action_dim(i)));
    for (double& v : a[static_cast<std::size_t>(i)]) v = rng.uniform(-1.0, 1.0);
  }
  return a;
}

}  // namespace

TEST_CASE("same seed and actions give a bitwise-identical trajectory") {
  for (const char* name : {"coop_nav", "predator_prey"}) {
    auto env1 = envs::make_env({{"name", name}});
    auto env2 = envs::make_env({{"name", name}});
    Rng act_rng1(99), act_rng2(99);
    auto o1 = env1->reset(1234);
    auto o2 = env2->reset(1234);
    CHECK(o1 == o2);
    for (int t = 0; t < 30; ++t) {
      const auto a1 = random_actions(act_rng1, *env1);
      const auto a2 = random_actions(act_rng2, *env2);
      const auto r1 = env1->step(a1);
      const auto r2 = env2->step(a2);
      CHECK(r1.obs == r2.obs);
      CHECK(r1.reward == r2.reward);
    }
    CHECK(env1->reset(77) != env1->reset(78));
  }
}

TEST_CASE("cooperative navigation observation layout") {
  CoopNavEnv env{CoopNavConfig{}};
  const auto obs = env.reset(5);
  REQUIRE(obs.size() == 3);
  // own position/velocity plus relative positions of others and landmarks
  REQUIRE(static_cast<int>(obs[0].size()) == 4 + 2 * 2 + 2 * 3);
  // reconstruct agent 1's absolute position from agent 0's relative entry
  const double a0x = obs[0][0], a0y = obs[0][1];
  const double rel1x = obs[0][4], rel1y = obs[0][5];
  CHECK(obs[1][0] == doctest::Approx(a0x + rel1x).epsilon(1e-12));
  CHECK(obs[1][1] == doctest::Approx(a0y + rel1y).epsilon(1e-12));
  // velocities start at zero
  CHECK(obs[0][2] == 0.0);
  CHECK(obs[0][3] == 0.0);
}

TEST_CASE("cooperative navigation reward cases") {
  CoopNavConfig cfg;
  SUBCASE("each agent exactly on a distinct landmark gives the occupancy bonus") {
    std::vector<double> agents = {0.0, 0.0, 0.5, 0.5, -0.5, -0.5};
    std::vector<double> landmarks = agents;
    CHECK(envs::coopnav_reward(agents, landmarks, cfg) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("two overlapping agents contribute one collision penalty") {
    std::vector<double> agents = {0.0, 0.0, 0.0, 0.0, 0.9, 0.9};
    std::vector<double> landmarks = {0.0, 0.0, 0.9, 0.9, -0.9, -0.9};
    // distances: 0 (agents at origin), 0 (agent 2), nearest to (-0.9,-0.9) is agent at origin
    const double d = std::sqrt(2.0) * 0.9;
    CHECK(envs::coopnav_reward(agents, landmarks, cfg) ==
          doctest::Approx(-d - 10.0).epsilon(1e-12));
  }
  SUBCASE("equidistant landmarks sum linearly") {
    // one agent, three landmarks all at distance d, no bonus, no collisions
    CoopNavConfig one;
    one.n_agents = 1;
    const double d = 0.4;
    std::vector<double> agents = {0.0, 0.0};
    std::vector<double> landmarks = {d, 0.0, -d, 0.0, 0.0, d};
    CHECK(envs::coopnav_reward(agents, landmarks, one) ==
          doctest::Approx(-3.0 * d).epsilon(1e-12));
  }
}

TEST_CASE("cooperative navigation per-step reward stays within the analytic bound") {
  CoopNavEnv env{CoopNavConfig{}};
  const double bound = env.max_abs_reward();
  Rng rng(31);
  env.reset(7);
  for (int t = 0; t < 50; ++t) {
    const auto sr = env.step(random_actions(rng, env));
    CHECK(std::abs(sr.reward) <= bound);
    if (sr.done()) break;
  }
}

TEST_CASE("predator-prey lattice spawns sixteen preys on a four-by-four grid") {
  PredatorPreyEnv env{PredatorPreyConfig{}};
  env.reset(3);
  const auto& prey = env.prey_positions();
  REQUIRE(prey.size() == 32);
  std::set<double> xs, ys;
  for (int p = 0; p < 16; ++p) {
    xs.insert(prey[2 * p]);
    ys.insert(prey[2 * p + 1]);
  }
  CHECK(xs.size() == 4);
  CHECK(ys.size() == 4);
  CHECK(*xs.begin() == doctest::Approx(-0.6));
  CHECK(*xs.rbegin() == doctest::Approx(0.6));
}

TEST_CASE("prey capture needs the full quota simultaneously") {
  PredatorPreyConfig cfg;
  cfg.n_predators = 3;
  cfg.capture_quota = 2;
  std::vector<double> prey_pos = {0.0, 0.0};
  std::vector<char> alive = {1};
  SUBCASE("one predator in range is not enough") {
    std::vector<double> predators = {0.05, 0.0, 0.9, 0.9, -0.9, 0.9};
    CHECK(envs::pp_captures(predators, prey_pos, alive, cfg).empty());
    CHECK(envs::pp_reward(0, 0, cfg) == 0.0);
  }
  SUBCASE("two predators in range capture the prey") {
    std::vector<double> predators = {0.05, 0.0, -0.05, 0.0, 0.9, 0.9};
    const auto captured = envs::pp_captures(predators, prey_pos, alive, cfg);
    REQUIRE(captured.size() == 1);
    CHECK(captured[0] == 0);
  }
}

TEST_CASE("team reward doubles after each full clear") {
  PredatorPreyConfig cfg;
  CHECK(envs::pp_reward(1, 0, cfg) == 10.0);
  CHECK(envs::pp_reward(1, 1, cfg) == 20.0);  // after the first full clear
  CHECK(envs::pp_reward(2, 2, cfg) == 80.0);
  CHECK(envs::pp_reward(0, 3, cfg) == 0.0);
}

TEST_CASE("respawn restores the lattice and advances the round") {
  PredatorPreyConfig cfg;
  cfg.n_predators = 2;
  cfg.n_preys = 4;
  cfg.capture_quota = 1;
  cfg.capture_radius = 10.0;  // everything in range: all captured on the first step
  cfg.horizon = 10;
  PredatorPreyEnv env{cfg};
  env.reset(11);
  CHECK(env.alive_count() == 4);
  envs::JointAction idle(2, std::vector<double>{0.0, 0.0});
  const auto sr = env.step(idle);
  CHECK(sr.reward == doctest::Approx(4 * 10.0));  // four captures in round zero
  CHECK(env.round() == 1);
  CHECK(env.alive_count() == 4);  // respawned on the same lattice
  CHECK(env.prey_positions() == PredatorPreyEnv::lattice_positions(4, cfg.lattice_half_span));
  const auto sr2 = env.step(idle);
  CHECK(sr2.reward == doctest::Approx(4 * 20.0));  // doubled team reward
}

TEST_CASE("alive plus captured preys always cover the population") {
  PredatorPreyConfig cfg;
  cfg.n_predators = 3;
  cfg.capture_quota = 1;
  cfg.capture_radius = 0.35;
  PredatorPreyEnv env{cfg};
  env.reset(13);
  Rng rng(17);
  int captured_so_far = 0;
  for (int t = 0; t < cfg.horizon; ++t) {
    const int alive_before = env.alive_count();
    const int round_before = env.round();
    const auto sr = env.step(random_actions(rng, env));
    const int alive_after = env.alive_count();
    if (env.round() == round_before) {
      const int captured = alive_before - alive_after;
      CHECK(captured >= 0);
      captured_so_far += captured;
      CHECK(alive_after + captured_so_far == cfg.n_preys);
    } else {
      captured_so_far = 0;
      CHECK(alive_after == cfg.n_preys);
    }
    if (sr.done()) break;
  }
}

TEST_CASE("stepping a finished episode is rejected") {
  CoopNavConfig cfg;
  cfg.horizon = 2;
  CoopNavEnv env{cfg};
  env.reset(1);
  envs::JointAction idle(3, std::vector<double>{0.0, 0.0});
  env.step(idle);
  const auto sr = env.step(idle);
  CHECK(sr.truncated);
  CHECK_THROWS_AS(env.step(idle), std::logic_error);
}

TEST_CASE("out-of-range action components are clipped and counted") {
  CoopNavEnv env{CoopNavConfig{}};
  env.reset(2);
  envs::JointAction big(3, std::vector<double>{5.0, -7.0});
  env.step(big);
  CHECK(env.clipped_action_count() == 6);
  // positions stay inside the world box
  const auto obs = env.reset(3);
  for (const auto& o : obs) {
    CHECK(std::abs(o[0]) <= 1.0);
    CHECK(std::abs(o[1]) <= 1.0);
  }
}

TEST_CASE("discrete game validation") {
  envs::DiscreteGame g;
  g.n_states = 2;
  g.n_agents = 2;
  g.action_counts = {2, 2};
  g.gamma = 0.9;
  g.transition.assign(2 * 4 * 2, 0.5);
  g.reward.assign(2 * 4, 0.0);
  CHECK_NOTHROW(g.validate());
  g.transition[0] = 0.75;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  g.transition[0] = 0.5;
  g.gamma = 1.0;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}

TEST_CASE("factory rejects unknown names and keys") {
  CHECK_THROWS_AS(envs::make_env({{"name", "multi_walker"}}), std::invalid_argument);
  CHECK_THROWS_AS(envs::make_env({{"name", "coop_nav"}, {"bogus", 1}}), std::invalid_argument);
  auto env = envs::make_env({{"name", "predator_prey"}, {"n_predators", 2}, {"capture_quota", 2}});
  CHECK(env->n_agents() == 2);
}

TEST_SUITE_END();
