#include <doctest.h>

#include <cmath>
#include <limits>

#include "macie/attribution.hpp"
#include "macie/collective.hpp"
#include "macie/counterfactual.hpp"
#include "macie/policies.hpp"
#include "macie/rng.hpp"
#include "test_envs_util.hpp"
#include "test_util.hpp"

using namespace macie;
using macie::testing::AdditiveEnv;
using macie::testing::synthetic_history;

namespace {

int uniform_action(std::uint64_t seed, std::size_t agent, std::size_t e, std::size_t t, int n) {
  return static_cast<int>(derive_stream(SeedTree{seed}, "act", {agent, e, t}).uniform_index(n));
}

History constant_state_history(std::size_t agents, std::size_t episodes, std::size_t steps,
                               std::function<JointAction(std::size_t, std::size_t)> act) {
  return synthetic_history(
      agents, 1, episodes, steps, [](std::size_t, std::size_t) { return StateVec{0.0}; },
      [&](std::size_t e, std::size_t t, const StateVec&) { return act(e, t); },
      [](std::size_t, std::size_t, const StateVec&, const JointAction&) { return 0.0; });
}

}  // namespace

TEST_CASE("synergy formula") {
  CHECK(synergy(10, 0, 4, 6) == 0.0);
  CHECK(synergy(10, 0, 3, 4) == 3.0);
}

TEST_CASE("synergy matrix matches a brute-force coalition table") {
  // v(empty)=1, v({0})=3, v({1})=4, v({0,1})=9.
  const ValueFunction v = ValueFunction::from_table({1.0, 3.0, 4.0, 9.0});
  const auto sigma = synergy_matrix(v);
  const double phi0 = 9.0 - 4.0, phi1 = 9.0 - 3.0;
  CHECK(sigma[0][1] == doctest::Approx(9.0 - 1.0 - phi0 - phi1));
  CHECK(sigma[1][0] == sigma[0][1]);
  CHECK(sigma[0][0] == 0.0);
}

TEST_CASE("additive environment shows no synergy") {
  const AdditiveEnv env({1.0, 2.0, 0.5}, 10);
  const auto pol = make_skill_policies({0.7, 0.75, 0.8});
  const EnvSimulator sim(env, pol, std::make_shared<BaselinePolicy>(5), episode_seeds(SeedTree{3}, 50));
  const auto v = ValueFunction::from_simulator(sim, {});
  const auto sigma = synergy_matrix(v);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(sigma[i][j]) < 0.1);
  }
}

TEST_CASE("interactions keep pairs above the threshold") {
  const std::vector<std::vector<double>> small{{0, 0.01}, {0.01, 0}};
  CHECK(interactions(small, 0.05).empty());
  const std::vector<std::vector<double>> one{{0, 0.15}, {0.15, 0}};
  const auto set = interactions(one, 0.05);
  REQUIRE(set.size() == 1);
  CHECK(set[0] == Interaction{0, 1, 0.15});
  CHECK(interactions(one, std::numeric_limits<double>::infinity()).empty());
  const std::vector<std::vector<double>> neg{{0, -0.9, 0}, {-0.9, 0, 0.2}, {0, 0.2, 0}};
  const auto both = interactions(neg, 0.1);
  REQUIRE(both.size() == 2);
  CHECK(both[1] == Interaction{1, 2, 0.2});
  CHECK_THROWS_AS(interactions(one, -1.0), ConfigError);
}

TEST_CASE("synergy index arithmetic") {
  CHECK(synergy_index(10, {2, 3}) == doctest::Approx(0.5));
  CHECK(std::abs(synergy_index(0, {4.1665, 4.1665}) - -1.0) < 1e-6);
  CHECK(synergy_index(5, {2, 3}) == 0.0);
  CHECK(synergy_index(0, {0, 0}) == 0.0);
  CHECK_THROWS_AS(synergy_index(1, {1}), ConfigError);
}

TEST_CASE("property: synergy index stays within [-2, 2]") {
  RngStream rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const double all = rng.uniform() * 20 - 10;
    std::vector<double> solo(2 + rng.uniform_index(3));
    for (double& s : solo) s = rng.uniform() * 20 - 10;
    const double si = synergy_index(all, solo);
    CHECK((si >= -2.0 && si <= 2.0));
  }
}

TEST_CASE("coordination score: repeated joint actions score 1") {
  const History varied = constant_state_history(3, 2, 12, [](std::size_t, std::size_t) { return JointAction{0, 2, 4}; });
  CHECK(coordination_score(varied) == doctest::Approx(1.0));
  const History flat = constant_state_history(3, 2, 12, [](std::size_t, std::size_t) { return JointAction{1, 1, 1}; });
  CHECK(coordination_score(flat) == 1.0);
}

TEST_CASE("coordination score of independent actions is near zero") {
  const History h = constant_state_history(3, 10, 1000, [](std::size_t e, std::size_t t) {
    return JointAction{uniform_action(1, 0, e, t, 5), uniform_action(1, 1, e, t, 5), uniform_action(1, 2, e, t, 5)};
  });
  const double cs = coordination_score(h);
  CHECK(std::abs(cs) < 0.05);
  CHECK((cs >= -1.0 && cs <= 1.0));
}

TEST_CASE("coordination score needs two agents") {
  const History h = constant_state_history(1, 1, 4, [](std::size_t, std::size_t) { return JointAction{0}; });
  CHECK_THROWS_AS(coordination_score(h), ConfigError);
}

TEST_CASE("information integration: independent agents carry no information") {
  const History h = constant_state_history(2, 10, 1000, [](std::size_t e, std::size_t t) {
    return JointAction{uniform_action(2, 0, e, t, 5), uniform_action(2, 1, e, t, 5)};
  });
  CHECK(pair_information(h, 0, 1) < 0.05);
  CHECK(pair_information(h, 1, 0) < 0.05);
  CHECK(information_integration(h) >= 0.0);
}

TEST_CASE("information integration: a copying agent shares ln 5 nats") {
  const History h = constant_state_history(2, 10, 1000, [](std::size_t e, std::size_t t) {
    const int a = uniform_action(3, 0, e, t, 5);
    return JointAction{a, a};
  });
  CHECK(std::abs(pair_information(h, 0, 1) - std::log(5.0)) < 0.05);
  CHECK(std::abs(information_integration(h) - 2.0 * std::log(5.0)) < 0.1);
}

TEST_CASE("information integration of constant actions is zero") {
  const History h = constant_state_history(3, 2, 20, [](std::size_t, std::size_t) { return JointAction{2, 2, 2}; });
  CHECK(information_integration(h) == 0.0);
}

TEST_CASE("conditioning on state removes shared dependence on it") {
  // Both agents play the binned state, so they agree only through the state.
  const History h = synthetic_history(
      2, 1, 20, 200,
      [](std::size_t e, std::size_t t) { return StateVec{static_cast<double>(uniform_action(4, 9, e, t, 4))}; },
      [](std::size_t, std::size_t, const StateVec& s) { return JointAction{static_cast<int>(s[0]), static_cast<int>(s[0])}; },
      [](std::size_t, std::size_t, const StateVec&, const JointAction&) { return 0.0; });
  CHECK(pair_information(h, 0, 1, 4) < 1e-12);
  CHECK(pair_information(h, 0, 1, 1) == doctest::Approx(std::log(4.0)).epsilon(0.02));
}
