// Acceptance harness: one PASS/FAIL line per criterion with the measured values.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "macie/attribution.hpp"
#include "macie/collective.hpp"
#include "macie/counterfactual.hpp"
#include "macie/envs.hpp"
#include "macie/policies.hpp"
#include "macie/report.hpp"
#include "macie/rng.hpp"
#include "macie/scm.hpp"
#include "test_envs_util.hpp"
#include "test_util.hpp"

using namespace macie;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& title, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = seconds_since(t0);
  if (!o.pass) ++failures;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", s);
  std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << title << ": " << o.detail << " ["
            << buf << " s]" << std::endl;
}

std::string num(double v, int digits = 4) {
  std::ostringstream out;
  out.precision(digits);
  out << v;
  return out.str();
}

// Table of 2^n coalition values with v(empty) = 0 and the rest uniform in [-1, 1].
std::vector<double> random_game(std::size_t n, RngStream& rng) {
  std::vector<double> v(std::size_t{1} << n, 0.0);
  for (std::size_t s = 1; s < v.size(); ++s) v[s] = 2.0 * rng.uniform() - 1.0;
  return v;
}

Outcome shapley_axioms() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::size_t n = 2; n <= 5; ++n) {
    for (std::uint64_t g = 0; g < 100; ++g) {
      RngStream rng = derive_stream(SeedTree{1}, "game", {n, g});
      const std::vector<double> v = random_game(n, rng);
      const std::vector<double> w = random_game(n, rng);
      const auto phi_v = shapley_exact(ValueFunction::from_table(v));
      const auto phi_w = shapley_exact(ValueFunction::from_table(w));
      // Efficiency.
      worst = std::max(worst, std::abs(std::accumulate(phi_v.begin(), phi_v.end(), 0.0) - v.back()));
      // Additivity.
      std::vector<double> sum(v.size());
      for (std::size_t s = 0; s < v.size(); ++s) sum[s] = v[s] + w[s];
      const auto phi_sum = shapley_exact(ValueFunction::from_table(sum));
      for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(phi_sum[i] - phi_v[i] - phi_w[i]));
      // Null player: agent n-1 adds nothing to any coalition.
      const Coalition last = Coalition{1} << (n - 1);
      std::vector<double> with_null = v;
      for (Coalition s = 0; s < v.size(); ++s) {
        if (s & last) with_null[s] = with_null[s & ~last];
      }
      worst = std::max(worst, std::abs(shapley_exact(ValueFunction::from_table(with_null))[n - 1]));
      // Symmetry: agents 0 and 1 are interchangeable once v is symmetrised over them.
      std::vector<double> sym(v.size());
      for (Coalition s = 0; s < v.size(); ++s) {
        Coalition swapped = s & ~Coalition{3};
        if (s & 1) swapped |= 2;
        if (s & 2) swapped |= 1;
        sym[s] = 0.5 * (v[s] + v[swapped]);
      }
      const auto phi_sym = shapley_exact(ValueFunction::from_table(sym));
      worst = std::max(worst, std::abs(phi_sym[0] - phi_sym[1]));
    }
  }
  const double s = seconds_since(t0);
  return {worst < 1e-9 && s < 5.0, "max axiom violation " + num(worst) + ", " + num(s, 3) + " s (limit 1e-9, 5 s)"};
}

Outcome mc_accuracy() {
  const auto t0 = Clock::now();
  std::string detail;
  bool ok = true;
  for (auto [n, M] : {std::pair<std::size_t, std::size_t>{2, 15}, {3, 12}}) {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      RngStream rng = derive_stream(SeedTree{2}, "game", {n, seed});
      const std::vector<double> v = random_game(n, rng);
      const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
      const ValueFunction vf = ValueFunction::from_table(v);
      const auto exact = shapley_exact(vf);
      const auto mc = shapley_mc(vf, M, seed);
      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i) err += std::abs(mc[i] - exact[i]);
      total += err / static_cast<double>(n) / (*hi - *lo);
    }
    const double mean = total / 200.0;
    ok &= mean < 0.05;
    detail += "N=" + std::to_string(n) + " M=" + std::to_string(M) + " mean error/range " + num(mean) + "; ";
  }
  const double s = seconds_since(t0);
  return {ok && s < 10.0, detail + num(s, 3) + " s (limit 0.05, 10 s)"};
}

Outcome normalization() {
  const std::vector<std::pair<std::vector<double>, std::vector<double>>> cases = {
      {{4.867, 5.333}, {47.7, 52.3}},
      {{-8.333, 3.333}, {71.4, 28.6}},
      {{-6.604, -9.411, -10.461}, {24.9, 35.5, 39.5}},
  };
  double worst = 0.0;
  std::string got;
  for (const auto& [phi, pct] : cases) {
    const auto hat = normalize(phi);
    for (std::size_t i = 0; i < phi.size(); ++i) {
      worst = std::max(worst, std::abs(100.0 * std::abs(hat[i]) - pct[i]));
      got += num(100.0 * std::abs(hat[i]), 3) + "% ";
    }
  }
  return {worst <= 0.1, got + "max deviation " + num(worst, 3) + " pp (limit 0.1)"};
}

Outcome si_arithmetic() {
  // Only the sum of the individual values enters the index.
  const double a = synergy_index(0.0, {5.0, 3.333});
  const double b = synergy_index(10.0, {2.0, 3.0});
  return {std::abs(a + 1.0) <= 1e-6 && std::abs(b - 0.5) <= 1e-12,
          "SI(0, 8.333) = " + num(a, 7) + ", SI(10, 5) = " + num(b, 7)};
}

Outcome skill_sensitivity() {
  const auto t0 = Clock::now();
  int hits = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    RunConfig c;
    c.env.name = "gridworld";
    c.alphas = {{0, 0.70}, {1, 0.80}};
    c.n_episodes = 25;
    c.K = 5;
    c.B = 100;
    c.seed = seed;
    c.threads = 1;
    const Report r = run_pipeline(c);
    const double p = r.p_values[1][0];
    const bool hit = r.agents[1].phi > r.agents[0].phi && p < 0.05;
    hits += hit;
    detail += "(" + num(r.agents[0].phi, 3) + ", " + num(r.agents[1].phi, 3) + ", p=" + num(p, 2) + ") ";
  }
  const double s = seconds_since(t0);
  return {hits >= 8 && s < 30.0, std::to_string(hits) + "/10 seeds with phi2 > phi1 and p < 0.05 " + detail +
                                     num(s, 3) + " s (need 8/10, 30 s)"};
}

// Agent i earns gains[i] * (1[a_i == 0] - 1/5) per step.
class CenteredAdditiveEnv final : public Environment {
 public:
  CenteredAdditiveEnv(std::vector<double> gains, int horizon) : inner_(gains, horizon), gains_(std::move(gains)) {}
  std::string name() const override { return "centered_additive"; }
  std::size_t num_agents() const override { return inner_.num_agents(); }
  std::size_t num_actions() const override { return inner_.num_actions(); }
  std::vector<std::string> action_names() const override { return inner_.action_names(); }
  std::vector<std::string> feature_layout() const override { return inner_.feature_layout(); }
  int horizon() const override { return inner_.horizon(); }
  EnvState reset(std::uint64_t seed) const override { return inner_.reset(seed); }
  StepResult step(const EnvState& s, const JointAction& ja, RngStream& rng) const override {
    StepResult r = inner_.step(s, ja, rng);
    r.team_reward = 0.0;
    for (std::size_t i = 0; i < gains_.size(); ++i) {
      r.rewards[i] -= gains_[i] / static_cast<double>(num_actions());
      r.team_reward += r.rewards[i];
    }
    return r;
  }
  ActionId greedy_action(const EnvState& s, std::size_t agent) const override { return inner_.greedy_action(s, agent); }

 private:
  macie::testing::AdditiveEnv inner_;
  std::vector<double> gains_;
};

double pipeline_si(const RunConfig& c, const History& h, const Environment& env) {
  return run_pipeline(c, h, &env).collective.si;
}

Outcome emergence_regimes() {
  const auto t0 = Clock::now();
  RunConfig base;
  base.n_episodes = 100;
  base.B = 0;
  base.threads = 1;

  // Team bonus dominates the individual goal rewards.
  RunConfig grid = base;
  grid.env.name = "gridworld";
  grid.env.collective_bonus = 50.0;
  const auto grid_env = make_env(grid.env);
  const double si_grid = pipeline_si(grid, pipeline_history(grid), *grid_env);

  // One skilled predator already captures; a second one is mostly redundant.
  RunConfig pursuit = base;
  pursuit.env.name = "predatorprey";
  pursuit.env.horizon = 40;
  pursuit.env.capture_reward = 50.0;
  pursuit.alphas = {{0, 1.0}, {1, 1.0}};
  const auto pursuit_env = make_env(pursuit.env);
  const double si_pursuit = pipeline_si(pursuit, pipeline_history(pursuit), *pursuit_env);

  // Independent per-agent rewards; uniform play earns zero in expectation, so the index
  // does not count an untrained partner's chance rewards as a shortfall.
  RunConfig additive = base;
  const CenteredAdditiveEnv add_env({1.0, 2.0}, 10);
  const History add_h = simulate_history(add_env, make_skill_policies(resolved_alphas(additive, 2)), 100,
                                         SeedTree{additive.seed}, 1);
  const double si_add = pipeline_si(additive, add_h, add_env);

  const double s = seconds_since(t0);
  const bool ok = si_grid > 0.1 && si_pursuit < -0.1 && std::abs(si_add) < 0.1 && s < 60.0;
  return {ok, "bonus gridworld SI " + num(si_grid) + " (> 0.1), pursuit SI " + num(si_pursuit) +
                  " (< -0.1), additive SI " + num(si_add) + " (|.| < 0.1), " + num(s, 3) + " s"};
}

Outcome synergy_oracle() {
  const macie::testing::ConjunctiveEnv env(2, 3.0, 12);
  RunConfig c;
  c.n_episodes = 40;
  c.B = 0;
  c.threads = 1;
  const std::vector<double> alphas = resolved_alphas(c, 2);
  const History h = simulate_history(env, make_skill_policies(alphas), c.n_episodes, SeedTree{c.seed}, 1);
  const Report r = run_pipeline(c, h, &env);

  // Brute force: replay every episode seed under each coalition with plain run_episode.
  const auto skilled = make_skill_policies(alphas);
  const PolicyPtr uniform = std::make_shared<BaselinePolicy>(env.num_actions());
  double v[4] = {0, 0, 0, 0};
  for (Coalition s = 0; s < 4; ++s) {
    std::vector<PolicyPtr> pol = {(s & 1) ? skilled[0] : uniform, (s & 2) ? skilled[1] : uniform};
    for (const Episode& ep : h.episodes) v[s] += outcome(run_episode(env, pol, ep.seed));
    v[s] /= static_cast<double>(h.size());
  }
  const double brute = v[1] + v[2] - v[3] - v[0];
  const double diff = std::abs(r.collective.sigma[0][1] - brute);
  return {diff <= 1e-9, "pipeline sigma " + num(r.collective.sigma[0][1], 10) + ", brute force " +
                            num(brute, 10) + ", |diff| " + num(diff)};
}

Outcome null_intervention() {
  double worst = 0.0;
  std::size_t checked = 0;
  for (const std::string name : {"gridworld", "coopnav", "predatorprey", "traffic"}) {
    EnvConfig ec;
    ec.name = name;
    const auto env = make_env(ec);
    const auto pol = make_skill_policies(default_skills(env->num_agents()));
    const History h = simulate_history(*env, pol, 20, SeedTree{9}, 1);
    std::vector<std::uint64_t> seeds;
    for (const auto& ep : h.episodes) seeds.push_back(ep.seed);
    const EnvSimulator sim(*env, pol, pol, seeds);
    CfOptions opt;
    opt.noise = NoiseMode::common;
    const double y_fact = outcome(h);
    for (std::size_t i = 0; i < env->num_agents(); ++i) {
      const double phi = causal_effect(y_fact, mean_counterfactual(intervene_and_rollout(sim, h, i, 5, opt)));
      worst = std::max(worst, std::abs(phi));
      ++checked;
    }
  }
  return {worst == 0.0, std::to_string(checked) + " agent effects across 4 environments, max |phi| " + num(worst)};
}

Outcome k_convergence_check() {
  int inversions = 0;
  int endpoint_failures = 0;
  std::string detail;
  const std::vector<std::size_t> Ks = {3, 5, 10, 20};
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    RunConfig c;
    c.env.name = "gridworld";
    c.seed = seed;
    c.threads = 1;
    const auto series = k_convergence(c, Ks);
    for (std::size_t i = 0; i < series[0].std_error.size(); ++i) {
      for (std::size_t k = 1; k < series.size(); ++k) inversions += series[k].std_error[i] >= series[k - 1].std_error[i];
      endpoint_failures += series.back().std_error[i] >= series.front().std_error[i];
    }
    if (seed == 1) {
      detail = "seed 1 agent 1 SE:";
      for (const auto& p : series) detail += " K" + std::to_string(p.K) + "=" + num(p.std_error[0]);
      detail += "; ";
    }
  }
  return {inversions <= 1 && endpoint_failures == 0,
          detail + std::to_string(inversions) + " inversions (allow 1), " + std::to_string(endpoint_failures) +
              " agent-seeds with SE(20) >= SE(3)"};
}

Outcome model_ordering() {
  EnvConfig ec;
  ec.name = "coopnav";
  const auto env = make_env(ec);
  const History h = simulate_history(*env, make_skill_policies(default_skills(env->num_agents())),
                                     default_episode_count("coopnav"), SeedTree{42}, 1);
  auto score = [&](ModelKind kind) {
    FitOptions fo;
    fo.model = kind;
    fo.num_actions = env->num_actions();
    const CausalGraph g = prune_edges(build_graph_template(h.num_agents, h.state_dim()), h, 0.1);
    double best = std::numeric_limits<double>::max();
    SCModel m;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = Clock::now();
      m = fit_equations(g, h, fo);
      best = std::min(best, seconds_since(t0));
    }
    return std::pair{validate(m, h, 5).mean_r2, best};
  };
  const auto [r2_tree, t_tree] = score(ModelKind::tree_ensemble);
  const auto [r2_lin, t_lin] = score(ModelKind::linear);
  const bool ok = r2_tree - r2_lin >= 0.05 && t_lin < t_tree;
  return {ok, "CV R2 tree " + num(r2_tree) + " vs linear " + num(r2_lin) + " (gap >= 0.05); fit time linear " +
                  num(1e3 * t_lin, 3) + " ms vs tree " + num(1e3 * t_tree, 3) + " ms"};
}

Outcome performance() {
  const auto rows = bench(builtin_configs());
  double total = 0.0;
  bool dominant = true;
  std::string detail;
  for (const auto& r : rows) {
    total += static_cast<double>(r.timings.total_ns) * 1e-9;
    dominant &= r.counterfactual_dominant;
    const auto top = std::max_element(r.fractions.begin(), r.fractions.end()) - r.fractions.begin();
    detail += r.env + " step2 " + num(100.0 * r.fractions[1], 3) + "% (largest step " + step_labels()[top] + " " +
              num(100.0 * r.fractions[top], 3) + "%); ";
  }
  return {total < 10.0 && dominant,
          "total " + num(total, 3) + " s (limit 10 s); " + detail + "step 2 largest everywhere: " +
              (dominant ? "yes" : "no")};
}

Outcome determinism() {
  const std::size_t max_threads = std::max<std::size_t>(4, std::thread::hardware_concurrency());
  std::size_t compared = 0;
  bool ok = true;
  for (const std::string name : {"gridworld", "coopnav", "predatorprey", "traffic"}) {
    RunConfig c;
    c.env.name = name;
    c.threads = 1;
    const std::string a = report_to_json(run_pipeline(c), false);
    const std::string b = report_to_json(run_pipeline(c), false);
    c.threads = max_threads;
    const std::string x = report_to_json(run_pipeline(c), false);
    const std::string y = report_to_json(run_pipeline(c), false);
    ok &= a == b && x == y && a == x;
    compared += 4;
  }
  return {ok, std::to_string(compared) + " reports over 4 environments at 1 and " + std::to_string(max_threads) +
                  " threads byte-identical: " + (ok ? "yes" : "no")};
}

Outcome ii_calibration() {
  auto action = [](std::uint64_t tag, std::size_t e, std::size_t t) {
    return static_cast<int>(derive_stream(SeedTree{13}, "act", {tag, e, t}).uniform_index(5));
  };
  auto zero_state = [](std::size_t, std::size_t) { return StateVec{0.0}; };
  auto no_reward = [](std::size_t, std::size_t, const StateVec&, const JointAction&) { return 0.0; };
  const History indep = macie::testing::synthetic_history(
      3, 1, 500, 20, zero_state,
      [&](std::size_t e, std::size_t t, const StateVec&) {
        return JointAction{action(0, e, t), action(1, e, t), action(2, e, t)};
      },
      no_reward);
  const History copy = macie::testing::synthetic_history(
      2, 1, 500, 20, zero_state,
      [&](std::size_t e, std::size_t t, const StateVec&) {
        const int a = action(3, e, t);
        return JointAction{a, a};
      },
      no_reward);
  double worst_indep = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (i != j) worst_indep = std::max(worst_indep, pair_information(indep, i, j));
    }
  }
  const double copied = pair_information(copy, 0, 1);
  const double gap = std::abs(copied - std::log(5.0));
  return {worst_indep < 0.05 && gap <= 0.05, "independent max pair " + num(worst_indep) + " nats (< 0.05); copy pair " +
                                                 num(copied) + " vs ln 5 = " + num(std::log(5.0)) + " (gap " +
                                                 num(gap) + ")"};
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  criterion(1, "Shapley axioms", shapley_axioms);
  criterion(2, "Monte Carlo Shapley accuracy", mc_accuracy);
  criterion(3, "normalization arithmetic", normalization);
  criterion(4, "synergy index arithmetic", si_arithmetic);
  criterion(5, "skill sensitivity", skill_sensitivity);
  criterion(6, "emergence sign regimes", emergence_regimes);
  criterion(7, "synergy oracle equivalence", synergy_oracle);
  criterion(8, "null-intervention invariance", null_intervention);
  criterion(9, "K convergence", k_convergence_check);
  criterion(10, "model-kind ordering", model_ordering);
  criterion(11, "performance envelope", performance);
  criterion(12, "determinism", determinism);
  criterion(13, "information integration calibration", ii_calibration);
  std::cout << (13 - failures) << "/13 criteria passed in " << num(seconds_since(t0), 3) << " s" << std::endl;
  return failures == 0 ? 0 : 1;
}
