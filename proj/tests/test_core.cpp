#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "macie/core.hpp"
#include "macie/counterfactual.hpp"
#include "macie/episode_log.hpp"
#include "macie/envs.hpp"
#include "macie/format.hpp"
#include "macie/parallel.hpp"
#include "macie/policies.hpp"
#include "macie/rng.hpp"
#include "test_util.hpp"

using namespace macie;
using macie::testing::episode_with_rewards;
using macie::testing::history_of;

TEST_CASE("outcome sums one episode and averages a history") {
  CHECK(outcome(episode_with_rewards({1, 2, 3})) == 6.0);
  CHECK(outcome(history_of({episode_with_rewards({4}), episode_with_rewards({3, 5})})) == 6.0);
  CHECK(outcome(episode_with_rewards({0, 0, 0})) == 0.0);
}

TEST_CASE("outcome rejects empty input") {
  CHECK_THROWS_WITH_AS(outcome(History{}), "no episodes", Error);
  CHECK_THROWS_AS(outcome(Episode{}), Error);
}

TEST_CASE("terminal success indicator reads the terminated flag") {
  Episode won = episode_with_rewards({1, 1});
  won.terminated = true;
  const Episode lost = episode_with_rewards({1, 1});
  const OutcomeSpec spec{OutcomeKind::terminal_success_indicator};
  CHECK(outcome(won, spec) == 1.0);
  CHECK(outcome(lost, spec) == 0.0);
  CHECK(outcome(history_of({won, lost}), spec) == 0.5);
  CHECK(cumulative_trace(won, spec) == std::vector<double>{0.0, 1.0});
}

TEST_CASE("cumulative trace is the prefix sum") {
  CHECK(cumulative_trace(episode_with_rewards({1, 2, 3})) == std::vector<double>{1, 3, 6});
  CHECK(cumulative_trace(episode_with_rewards({0, 0})) == std::vector<double>{0, 0});
  CHECK(cumulative_trace(episode_with_rewards({5})) == std::vector<double>{5});
}

TEST_CASE("mean trace pads short episodes with their final value") {
  const History h = history_of({episode_with_rewards({1, 1, 1}), episode_with_rewards({2})});
  CHECK(mean_trace(h, 3) == std::vector<double>{1.5, 2.0, 2.5});
}

TEST_CASE("property: last cumulative value equals the episode outcome") {
  RngStream rng = derive_stream(SeedTree{9}, "test-trace");
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> r(1 + rng.uniform_index(20));
    for (double& x : r) x = std::round((rng.uniform() * 10 - 5) * 4) / 4;  // exact in binary
    const Episode ep = episode_with_rewards(r);
    CHECK(cumulative_trace(ep).back() == outcome(ep));
  }
}

TEST_CASE("outcome kind names round-trip") {
  for (auto k : {OutcomeKind::cumulative_team_reward, OutcomeKind::terminal_success_indicator}) {
    CHECK(outcome_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(outcome_kind_from_string("bogus"), ConfigError);
}

TEST_CASE("check_history enforces shared shape") {
  History h = history_of({episode_with_rewards({1, 2}), episode_with_rewards({3})});
  CHECK_NOTHROW(check_history(h));
  h.episodes[1].env_name = "other";
  CHECK_THROWS_AS(check_history(h), Error);
  h = history_of({episode_with_rewards({1, 2}, 2)}, 1);
  CHECK_THROWS_AS(check_history(h), Error);
}

TEST_CASE("History::resample picks episodes by index") {
  const History h = history_of({episode_with_rewards({1}), episode_with_rewards({2})});
  const std::vector<std::size_t> idx{1, 1, 0};
  const History r = h.resample(idx);
  REQUIRE(r.size() == 3);
  CHECK(outcome(r) == doctest::Approx(5.0 / 3.0));
}

namespace {

std::vector<std::uint64_t> draws(RngStream s, int n) {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < n; ++i) out.push_back(s.next_u64());
  return out;
}

// Pearson correlation of paired uniform draws.
double draw_correlation(RngStream a, RngStream b, int n) {
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (int i = 0; i < n; ++i) {
    const double x = a.uniform(), y = b.uniform();
    sa += x; sb += y; saa += x * x; sbb += y * y; sab += x * y;
  }
  const double cov = sab / n - sa / n * sb / n;
  return cov / std::sqrt((saa / n - sa / n * sa / n) * (sbb / n - sb / n * sb / n));
}

}  // namespace

TEST_CASE("derived streams are deterministic") {
  CHECK(draws(derive_stream(SeedTree{42}, "cf", {0, 3}), 10) == draws(derive_stream(SeedTree{42}, "cf", {0, 3}), 10));
}

TEST_CASE("derived streams differ across indices and seeds") {
  const auto base = derive_stream(SeedTree{42}, "cf", {0, 3});
  CHECK(draws(base, 10) != draws(derive_stream(SeedTree{42}, "cf", {0, 4}), 10));
  CHECK(draws(base, 10) != draws(derive_stream(SeedTree{43}, "cf", {0, 3}), 10));
  CHECK(std::abs(draw_correlation(base, derive_stream(SeedTree{42}, "cf", {0, 4}), 10000)) < 0.05);
  CHECK(std::abs(draw_correlation(base, derive_stream(SeedTree{43}, "cf", {0, 3}), 10000)) < 0.05);
}

TEST_CASE("derived streams separate tags and index orders") {
  const auto a = draws(derive_stream(SeedTree{1}, "cf", {0, 1}), 4);
  CHECK(a != draws(derive_stream(SeedTree{1}, "cf", {1, 0}), 4));
  CHECK(a != draws(derive_stream(SeedTree{1}, "agent", {0, 1}), 4));
  CHECK(draws(derive_stream(SeedTree{1}, "x"), 4) != draws(derive_stream(SeedTree{1}, "x", {0}), 4));
}

TEST_CASE("uniform draws lie in [0, 1) and indices in range") {
  RngStream s = derive_stream(SeedTree{5}, "bounds");
  for (int i = 0; i < 10000; ++i) {
    const double u = s.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(s.uniform_index(7) < 7);
  }
  CHECK(scale_to_index(0, 5) == 0);
  CHECK(scale_to_index(~std::uint64_t{0}, 5) == 4);
}

TEST_CASE("stream position counts draws") {
  RngStream s(123);
  CHECK(s.position() == 0);
  s.next_u64();
  s.uniform();
  CHECK(s.position() == 2);
}

TEST_CASE("shortest and fixed formatting") {
  CHECK(shortest(0.1) == "0.1");
  CHECK(std::stod(shortest(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(fixed(2.3546, 3) == "2.355");
  CHECK(fixed(-0.0004, 3) == "0.000");  // no negative zero in text
  CHECK(fixed(7.6875, 3) == "7.688");
  CHECK(join({"a", "b", "c"}, ", ") == "a, b, c");
}

TEST_CASE("episode log round-trips a simulated history exactly") {
  EnvConfig ec;
  ec.name = "coopnav";
  const auto env = make_env(ec);
  const History h = simulate_history(*env, make_skill_policies(default_skills(3)), 3, SeedTree{7}, 1);
  std::stringstream ss;
  write_episode_log(ss, h);
  const History back = read_episode_log(ss);
  CHECK(back == h);
}

TEST_CASE("episode log file round-trip and errors") {
  const History h = history_of({episode_with_rewards({1.5, -2}, 2), episode_with_rewards({0.25}, 2)}, 2);
  const auto path = (std::filesystem::temp_directory_path() / "macie_test_log.tsv").string();
  save_episode_log(path, h);
  CHECK(load_episode_log(path) == h);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_episode_log("/nonexistent/dir/log.tsv"), Error);
  std::stringstream empty;
  CHECK_THROWS_AS(read_episode_log(empty), Error);
  std::stringstream junk("#macie-log v1\tenv=x\tN=1\tT=2\tfeatures=t\nepisode\t1\t0\n0\tabc\t0\t1,1\n");
  CHECK_THROWS_AS(read_episode_log(junk), Error);
}

TEST_CASE("parallel_for covers every index once and rethrows") {
  for (std::size_t threads : {1u, 2u, 4u}) {
    std::vector<int> hits(100, 0);
    parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    CHECK_THROWS_AS(parallel_for(10, threads, [](std::size_t i) { if (i == 3) throw Error("boom"); }), Error);
  }
  CHECK(resolve_threads(3) == 3);
  CHECK(resolve_threads(0) >= 1);
}
