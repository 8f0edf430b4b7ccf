#include "macie/counterfactual.hpp"

#include <algorithm>
#include <cmath>

#include "macie/parallel.hpp"

namespace macie {

std::string to_string(PropagationMode mode) {
  return mode == PropagationMode::env_resim ? "env_resim" : "scm_rollout";
}

PropagationMode propagation_mode_from_string(const std::string& text) {
  if (text == "env_resim") return PropagationMode::env_resim;
  if (text == "scm_rollout") return PropagationMode::scm_rollout;
  throw ConfigError("unknown propagation mode '" + text + "' (valid: env_resim, scm_rollout)");
}

RngStream env_stream(std::uint64_t episode_seed) {
  return derive_stream(SeedTree{episode_seed}, "env");
}

RngStream agent_stream(std::uint64_t episode_seed, std::size_t agent) {
  return derive_stream(SeedTree{episode_seed}, "agent", {agent});
}

RngStream cf_stream(std::uint64_t episode_seed, std::size_t agent, std::size_t k) {
  return derive_stream(SeedTree{episode_seed}, "cf", {agent, k});
}

std::vector<std::uint64_t> episode_seeds(const SeedTree& tree, std::size_t n_episodes) {
  std::vector<std::uint64_t> out(n_episodes);
  for (std::size_t e = 0; e < n_episodes; ++e) out[e] = derive_seed(tree, "episode", {e});
  return out;
}

namespace {

Episode rollout_env(const Environment& env, const std::vector<const Policy*>& actors,
                    std::uint64_t seed, std::vector<RngStream> noise) {
  Episode ep;
  ep.env_name = env.name();
  ep.seed = seed;
  ep.horizon = env.horizon();
  EnvState s = env.reset(seed);
  RngStream env_rng = env_stream(seed);
  const std::size_t n = actors.size();
  JointAction ja(n);
  for (int t = 0; t < env.horizon() && !s.done; ++t) {
    for (std::size_t i = 0; i < n; ++i) ja[i] = actors[i]->act(env, s, i, draw_noise(noise[i]));
    StepResult r = env.step(s, ja, env_rng);
    ep.steps.push_back(Step{s.features, ja, std::move(r.rewards), r.team_reward});
    s = std::move(r.next);
    ep.terminated = r.terminal;
    if (r.done) break;
  }
  ep.final_state = s.features;
  return ep;
}

}  // namespace

Episode run_episode(const Environment& env, const std::vector<PolicyPtr>& policies,
                    std::uint64_t episode_seed, const std::vector<std::optional<RngStream>>& noise) {
  if (policies.size() != env.num_agents()) throw ConfigError("need one policy per agent");
  std::vector<const Policy*> actors;
  std::vector<RngStream> streams;
  for (std::size_t i = 0; i < policies.size(); ++i) {
    actors.push_back(policies[i].get());
    streams.push_back(i < noise.size() && noise[i] ? *noise[i] : agent_stream(episode_seed, i));
  }
  return rollout_env(env, actors, episode_seed, std::move(streams));
}

History simulate_history(const Environment& env, const std::vector<PolicyPtr>& policies,
                         std::size_t n_episodes, const SeedTree& tree, std::size_t threads) {
  History h;
  h.env_name = env.name();
  h.num_agents = env.num_agents();
  h.horizon = env.horizon();
  h.feature_layout = env.feature_layout();
  const auto seeds = episode_seeds(tree, n_episodes);
  h.episodes.resize(n_episodes);
  parallel_for(n_episodes, threads, [&](std::size_t e) { h.episodes[e] = run_episode(env, policies, seeds[e]); });
  return h;
}

EnvSimulator::EnvSimulator(const Environment& env, std::vector<PolicyPtr> policies,
                           PolicyPtr baseline, std::vector<std::uint64_t> seeds)
    : EnvSimulator(env, policies, std::vector<PolicyPtr>(policies.size(), baseline), std::move(seeds)) {}

EnvSimulator::EnvSimulator(const Environment& env, std::vector<PolicyPtr> policies,
                           std::vector<PolicyPtr> baselines, std::vector<std::uint64_t> seeds)
    : env_(env), policies_(std::move(policies)), baselines_(std::move(baselines)), seeds_(std::move(seeds)) {
  if (policies_.size() != env_.num_agents() || baselines_.size() != policies_.size()) {
    throw ConfigError("need one policy and one baseline per agent");
  }
  for (std::size_t i = 0; i < policies_.size(); ++i) {
    if (!policies_[i] || !baselines_[i]) throw ConfigError("null policy");
  }
}

Episode EnvSimulator::rollout(std::size_t episode, const Plan& plan) const {
  const std::uint64_t seed = seeds_.at(episode);
  const std::size_t n = policies_.size();
  if (plan.size() != n) throw Error("plan must name every agent");
  std::vector<const Policy*> actors(n);
  std::vector<RngStream> noise(n);
  for (std::size_t i = 0; i < n; ++i) {
    actors[i] = plan[i].role == Role::policy ? policies_[i].get() : baselines_[i].get();
    noise[i] = plan[i].noise ? *plan[i].noise : agent_stream(seed, i);
  }
  return rollout_env(env_, actors, seed, std::move(noise));
}

ScmSimulator::ScmSimulator(const SCModel& scm, const History& factual, std::size_t action_space_size,
                           const SeedTree& tree)
    : scm_(scm), factual_(factual), actions_(action_space_size), seeds_(episode_seeds(tree, factual.size())) {
  if (actions_ == 0) throw ConfigError("baseline action space size must be positive");
  if (factual_.empty()) throw Error("no episodes");
  if (scm_.graph().num_agents() != factual_.num_agents || scm_.graph().state_dim() != factual_.state_dim()) {
    throw Error("SCM does not match the history dimensions");
  }
}

Episode ScmSimulator::rollout(std::size_t episode, const Plan& plan) const {
  const Episode& src = factual_.episodes.at(episode);
  const CausalGraph& g = scm_.graph();
  const std::size_t n = g.num_agents();
  const std::size_t d = g.state_dim();
  if (plan.size() != n) throw Error("plan must name every agent");
  const std::uint64_t seed = seeds_.at(episode);
  std::vector<RngStream> noise(n);
  for (std::size_t i = 0; i < n; ++i) noise[i] = plan[i].noise ? *plan[i].noise : agent_stream(seed, i);

  Episode ep;
  ep.env_name = src.env_name;
  ep.seed = seed;
  ep.horizon = src.horizon;
  StateVec state = src.steps.front().state;
  JointAction prev;
  SCModel::Assignment v(g.nodes().size(), 0.0);
  double total = 0.0;
  for (std::size_t t = 0; t < src.steps.size(); ++t) {
    // The current state enters as S(t) for the first step and as S(t+1) afterwards,
    // where the lagged slice supplies the previous joint action.
    for (std::size_t f = 0; f < d; ++f) {
      v[g.id(NodeKind::state, f)] = state[f];
      v[g.id(NodeKind::next_state, f)] = state[f];
    }
    if (t > 0) {
      for (std::size_t i = 0; i < n; ++i) v[g.id(NodeKind::action, i)] = prev[i];
    }
    JointAction ja(n);
    for (std::size_t i = 0; i < n; ++i) {
      const ActionNoise z = draw_noise(noise[i]);
      if (plan[i].role == Role::baseline) {
        ja[i] = static_cast<ActionId>(scale_to_index(z.pick, actions_));
      } else {
        const NodeId node = t == 0 ? g.id(NodeKind::action, i) : g.id(NodeKind::next_action, i);
        ja[i] = static_cast<ActionId>(scm_.predict(node, v));
      }
    }
    for (std::size_t i = 0; i < n; ++i) v[g.id(NodeKind::action, i)] = ja[i];
    for (std::size_t f = 0; f < d; ++f) v[g.id(NodeKind::state, f)] = state[f];
    StateVec next(d);
    for (std::size_t f = 0; f < d; ++f) next[f] = scm_.predict(g.id(NodeKind::next_state, f), v);
    for (std::size_t f = 0; f < d; ++f) v[g.id(NodeKind::next_state, f)] = next[f];
    const double r = scm_.predict(g.id(NodeKind::reward), v);
    total += r;
    ep.steps.push_back(Step{state, ja, std::vector<double>(n, r / static_cast<double>(n)), r});
    state = std::move(next);
    prev = ja;
  }
  ep.final_state = state;
  SCModel::Assignment y(g.nodes().size(), 0.0);
  y[g.id(NodeKind::reward)] = total;
  ep.terminated = scm_.predict(g.id(NodeKind::outcome), y) > 0.5;
  return ep;
}

std::unique_ptr<Simulator> make_simulator(PropagationMode mode, const Environment* env,
                                          const std::vector<PolicyPtr>& policies,
                                          const SCModel* scm, const History& factual,
                                          const SeedTree& tree) {
  if (mode == PropagationMode::scm_rollout) {
    if (scm == nullptr) throw Error("scm_rollout mode requires a fitted SCModel");
    const std::size_t actions = env != nullptr ? env->num_actions() : scm->num_actions();
    return std::make_unique<ScmSimulator>(*scm, factual, actions, tree);
  }
  if (env == nullptr) throw Error("env_resim mode requires an environment");
  auto baseline = std::make_shared<BaselinePolicy>(env->num_actions());
  // Replays each factual episode from its own seed so Y(full) matches the history.
  std::vector<std::uint64_t> seeds;
  seeds.reserve(factual.size());
  for (const Episode& ep : factual.episodes) seeds.push_back(ep.seed);
  return std::make_unique<EnvSimulator>(*env, policies, baseline, std::move(seeds));
}

std::vector<int> critical_timesteps(const std::vector<double>& factual_trace,
                                    const std::vector<double>& cf_trace, double epsilon) {
  if (epsilon < 0.0 || std::isnan(epsilon)) throw ConfigError("epsilon must be non-negative");
  const std::size_t len = std::max(factual_trace.size(), cf_trace.size());
  std::vector<int> out;
  for (std::size_t t = 0; t < len; ++t) {
    const double a = t < factual_trace.size() ? factual_trace[t] : 0.0;
    const double b = t < cf_trace.size() ? cf_trace[t] : 0.0;
    if (std::abs(b - a) > epsilon) out.push_back(static_cast<int>(t + 1));
  }
  return out;
}

namespace {

std::size_t trace_length(const Simulator& sim, const History& h) {
  std::size_t len = static_cast<std::size_t>(std::max(sim.horizon(), 0));
  for (const Episode& ep : h.episodes) len = std::max(len, ep.length());
  return len;
}

}  // namespace

std::vector<CFSample> intervene_and_rollout(const Simulator& sim, const History& factual,
                                            std::size_t agent, std::size_t K, const CfOptions& options) {
  if (K < 1) throw ConfigError("K must be at least 1");
  if (agent >= sim.num_agents()) throw ConfigError("agent index out of range");
  const std::size_t n_ep = sim.num_episodes();
  if (factual.size() != n_ep) throw Error("factual history does not match the simulator's episodes");
  if (n_ep == 0) throw Error("no episodes");

  std::vector<Episode> episodes(K * n_ep);
  parallel_for(K * n_ep, options.threads, [&](std::size_t task) {
    const std::size_t k = task / n_ep;
    const std::size_t e = task % n_ep;
    Plan plan(sim.num_agents());
    plan[agent].role = Role::baseline;
    if (options.noise == NoiseMode::fresh) plan[agent].noise = cf_stream(sim.episode_seed(e), agent, k);
    episodes[task] = sim.rollout(e, plan);
  });

  const std::size_t len = trace_length(sim, factual);
  const auto fact_trace = mean_trace(factual, len, options.outcome);
  const double epsilon = options.epsilon_frac * std::abs(outcome(factual, options.outcome));
  std::vector<CFSample> out(K);
  for (std::size_t k = 0; k < K; ++k) {
    History h;
    h.env_name = factual.env_name;
    h.num_agents = factual.num_agents;
    h.horizon = factual.horizon;
    h.feature_layout = factual.feature_layout;
    h.episodes.assign(std::make_move_iterator(episodes.begin() + static_cast<std::ptrdiff_t>(k * n_ep)),
                      std::make_move_iterator(episodes.begin() + static_cast<std::ptrdiff_t>((k + 1) * n_ep)));
    CFSample& s = out[k];
    s.agent = AgentId{agent};
    s.k = k;
    s.trace = mean_trace(h, len, options.outcome);
    s.y = s.trace.back();
    s.critical = critical_timesteps(fact_trace, s.trace, epsilon);
    s.per_episode.reserve(n_ep);
    for (const Episode& ep : h.episodes) s.per_episode.push_back(outcome(ep, options.outcome));
  }
  return out;
}

std::vector<std::size_t> members(Coalition s, std::size_t num_agents) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < num_agents; ++i) {
    if ((s >> i) & 1u) out.push_back(i);
  }
  return out;
}

Coalition full_coalition(std::size_t num_agents) {
  if (num_agents >= 64) throw ConfigError("at most 63 agents are supported");
  return (Coalition{1} << num_agents) - 1;
}

CoalitionValue coalition_outcome(Coalition s, const Simulator& sim, const OutcomeSpec& spec,
                                 std::size_t threads) {
  const std::size_t n = sim.num_agents();
  if ((s & ~full_coalition(n)) != 0) throw ConfigError("coalition names an unknown agent");
  const std::size_t n_ep = sim.num_episodes();
  if (n_ep == 0) throw Error("no episodes");
  CoalitionValue cv;
  cv.coalition = s;
  cv.episodes_used = n_ep;
  cv.per_episode.assign(n_ep, 0.0);
  Plan plan(n);
  for (std::size_t i = 0; i < n; ++i) plan[i].role = ((s >> i) & 1u) ? Role::policy : Role::baseline;
  parallel_for(n_ep, threads, [&](std::size_t e) { cv.per_episode[e] = outcome(sim.rollout(e, plan), spec); });
  double sum = 0.0;
  for (double v : cv.per_episode) sum += v;
  cv.value = sum / static_cast<double>(n_ep);
  return cv;
}

}  // namespace macie
