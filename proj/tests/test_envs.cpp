#include <doctest.h>

#include <cmath>
#include <map>

#include "macie/envs.hpp"
#include "macie/policies.hpp"
#include "macie/rng.hpp"

using namespace macie;

namespace {

std::unique_ptr<Environment> env_named(const std::string& name) {
  EnvConfig c;
  c.name = name;
  return make_env(c);
}

// Pearson chi-square statistic of observed counts against a uniform expectation.
double chi_square_uniform(const std::vector<int>& counts, int total) {
  const double expected = static_cast<double>(total) / static_cast<double>(counts.size());
  double chi = 0.0;
  for (int c : counts) chi += (c - expected) * (c - expected) / expected;
  return chi;
}

// 99.9% quantile of chi-square with 4 degrees of freedom.
constexpr double kChi2Df4 = 18.467;

}  // namespace

TEST_CASE("make_env builds the documented environments") {
  const auto g = env_named("gridworld");
  CHECK(g->num_agents() == 2);
  CHECK(g->num_actions() == 5);
  CHECK(env_named("coopnav")->num_agents() == 3);
  CHECK(env_named("predatorprey")->num_agents() == 2);
  CHECK(env_named("traffic")->num_agents() == 3);
  CHECK(env_named("traffic")->num_actions() == 2);
  CHECK_THROWS_AS(env_named("foo"), ConfigError);
  EnvConfig bad;
  bad.horizon = 0;
  CHECK_THROWS_AS(make_env(bad), ConfigError);
  CHECK(default_episode_count("gridworld") == 25);
  CHECK(default_episode_count("coopnav") == 20);
  CHECK(default_episode_count("predatorprey") == 20);
  CHECK(default_episode_count("traffic") == 25);
}

TEST_CASE("reset is deterministic per seed and varies across seeds") {
  for (const auto& name : env_names()) {
    const auto env = env_named(name);
    CAPTURE(name);
    CHECK(env->reset(11).features == env->reset(11).features);
    CHECK(env->reset(11).features.size() == env->state_dim());
    int differing = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      differing += env->reset(2 * s).features != env->reset(2 * s + 1).features;
    }
    CHECK(differing >= 90);
  }
}

TEST_CASE("gridworld placements stay on the 5x5 grid") {
  const auto env = env_named("gridworld");
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto f = env->reset(s).features;
    for (std::size_t k = 0; k < 8; ++k) CHECK((f[k] >= 0.0 && f[k] < 5.0));
    CHECK(f[8] == 0.0);
    CHECK(f[9] == 0.0);
  }
}

TEST_CASE("gridworld pays the collective bonus when both agents reach goals together") {
  const auto env = env_named("gridworld");
  EnvState s;
  // a0 at (0,0) goal (1,0); a1 at (4,4) goal (3,4).
  s.features = {0, 0, 4, 4, 1, 0, 3, 4, 0, 0};
  RngStream rng(1);
  const StepResult r = env->step(s, {kRight, kLeft}, rng);
  CHECK(r.done);
  CHECK(r.rewards[0] == doctest::Approx(0.99));
  CHECK(r.rewards[1] == doctest::Approx(0.99));
  CHECK(r.team_reward == doctest::Approx(0.99 + 0.99 + 5.0));
  // One agent arriving alone earns no bonus and does not end the episode.
  const StepResult alone = env->step(s, {kRight, kStay}, rng);
  CHECK_FALSE(alone.done);
  CHECK(alone.team_reward == doctest::Approx(0.99 - 0.01));
}

TEST_CASE("gridworld moves are clipped at the walls") {
  const auto env = env_named("gridworld");
  EnvState s;
  s.features = {0, 0, 4, 4, 2, 2, 3, 3, 0, 0};
  RngStream rng(1);
  const StepResult r = env->step(s, {kLeft, kUp}, rng);
  CHECK(r.next.features[0] == 0.0);
  CHECK(r.next.features[3] == 4.0);
  CHECK(r.team_reward == doctest::Approx(-0.02));
}

TEST_CASE("traffic with empty queues pays zero reward") {
  EnvConfig c;
  c.name = "traffic";
  c.arrival_prob = 0.0;
  const auto env = make_env(c);
  EnvState s;
  s.features.assign(6, 0.0);
  RngStream rng(3);
  for (ActionId a : {0, 1}) {
    const StepResult r = env->step(s, {a, a, a}, rng);
    CHECK(r.team_reward == 0.0);
    CHECK(r.next.features == s.features);
  }
}

TEST_CASE("traffic green light discharges at most two vehicles") {
  EnvConfig c;
  c.name = "traffic";
  c.arrival_prob = 0.0;
  const auto env = make_env(c);
  EnvState s;
  s.features = {3, 1, 0, 0, 0, 0};
  RngStream rng(3);
  const StepResult r = env->step(s, {0, 0, 0}, rng);
  CHECK(r.next.features[0] == 1.0);
  CHECK(r.team_reward == doctest::Approx(-0.2));
  CHECK(env->greedy_action(s, 0) == 0);
}

TEST_CASE("coopnav applies the pairwise collision penalty") {
  const auto env = env_named("coopnav");
  EnvState s;
  // Agents 0 and 1 coincide; agent 2 elsewhere; landmarks under each agent.
  s.features = {0.5, 0.5, 0.5, 0.5, 0.1, 0.1, 0.5, 0.5, 0.5, 0.5, 0.1, 0.1};
  RngStream rng(1);
  const StepResult r = env->step(s, {kStay, kStay, kStay}, rng);
  CHECK(r.team_reward == doctest::Approx(-1.0));
  EnvState apart = s;
  apart.features[2] = 0.9;
  apart.features[8] = 0.9;
  CHECK(env->step(apart, {kStay, kStay, kStay}, rng).team_reward == doctest::Approx(0.0));
}

TEST_CASE("predatorprey capture pays each predator and ends the episode") {
  const auto env = env_named("predatorprey");
  EnvState s;
  s.features = {2, 3, 6, 6, 3, 3};
  RngStream rng(1);
  const StepResult r = env->step(s, {kRight, kStay}, rng);
  CHECK(r.done);
  CHECK(r.rewards[0] == doctest::Approx(9.95));
  CHECK(r.rewards[1] == doctest::Approx(9.95));
  const StepResult miss = env->step(s, {kLeft, kStay}, rng);
  CHECK_FALSE(miss.done);
  CHECK(miss.team_reward == doctest::Approx(-0.1));
}

TEST_CASE("episodes end at the horizon") {
  EnvConfig c;
  c.name = "coopnav";
  c.horizon = 3;
  const auto env = make_env(c);
  EnvState s = env->reset(5);
  RngStream rng(1);
  for (int t = 0; t < 3; ++t) {
    const StepResult r = env->step(s, {kStay, kStay, kStay}, rng);
    CHECK(r.done == (t == 2));
    s = r.next;
  }
}

TEST_CASE("invalid joint actions are rejected") {
  const auto env = env_named("gridworld");
  RngStream rng(1);
  CHECK_THROWS_AS(env->step(env->reset(1), {0}, rng), Error);
  CHECK_THROWS_AS(env->step(env->reset(1), {0, 5}, rng), Error);
}

TEST_CASE("skill policy with alpha 1 is the greedy move") {
  const auto env = env_named("gridworld");
  EnvState s;
  s.features = {1, 2, 4, 4, 3, 2, 0, 0, 0, 0};  // agent 0 left of its goal
  const SkillPolicy p(1.0);
  RngStream rng(9);
  for (int i = 0; i < 100; ++i) CHECK(p.act(*env, s, 0, draw_noise(rng)) == kRight);
}

TEST_CASE("skill policy with alpha 0 is uniform") {
  const auto env = env_named("gridworld");
  const EnvState s = env->reset(3);
  const SkillPolicy p(0.0);
  RngStream rng(10);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 10000; ++i) counts[p.act(*env, s, 0, draw_noise(rng))] += 1;
  CHECK(chi_square_uniform(counts, 10000) < kChi2Df4);
}

TEST_CASE("skill policy greedy frequency matches the mixture probability") {
  const auto env = env_named("gridworld");
  const EnvState s = env->reset(3);
  const ActionId g = env->greedy_action(s, 0);
  const SkillPolicy p(0.8);
  RngStream rng(11);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) hits += p.act(*env, s, 0, draw_noise(rng)) == g;
  const double freq = hits / 10000.0;
  CHECK(freq >= 0.80 - 0.02);
  CHECK(freq <= 0.80 + 0.2 / 5 + 0.02);
  CHECK(freq == doctest::Approx(0.84).epsilon(0.03));
}

TEST_CASE("baseline policy is uniform and validates its size") {
  const auto env = env_named("gridworld");
  const EnvState s = env->reset(1);
  RngStream rng(12);
  const BaselinePolicy one(1);
  for (int i = 0; i < 50; ++i) CHECK(one.act(*env, s, 0, draw_noise(rng)) == 0);
  const BaselinePolicy five(5);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 10000; ++i) counts[five.act(*env, s, 0, draw_noise(rng))] += 1;
  for (int c : counts) CHECK(std::abs(c / 10000.0 - 0.2) <= 0.02);
  CHECK(chi_square_uniform(counts, 10000) < kChi2Df4);
  CHECK_THROWS_AS(BaselinePolicy(0), ConfigError);
  CHECK_THROWS_AS(baseline_action(0, rng), ConfigError);
  CHECK_THROWS_AS(SkillPolicy(1.5), ConfigError);
}

TEST_CASE("policies consume the same two draws per step") {
  RngStream a(77), b(77);
  draw_noise(a);
  b.uniform();
  b.next_u64();
  CHECK(a == b);
}

TEST_CASE("default skills span 0.70 to 0.80") {
  CHECK(default_skills(2)[0] == doctest::Approx(0.70));
  CHECK(default_skills(2)[1] == doctest::Approx(0.80));
  const auto three = default_skills(3);
  CHECK(three[1] == doctest::Approx(0.75));
}
