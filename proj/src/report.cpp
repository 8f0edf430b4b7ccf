#include "macie/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "macie/episode_log.hpp"
#include "macie/format.hpp"
#include "macie/parallel.hpp"
#include "macie/policies.hpp"
#include "macie/scm.hpp"

namespace macie {

using nlohmann::json;

// ---------------------------------------------------------------------------------------
// Configuration

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "env.name",         "env.horizon",     "env.grid_size",     "env.collective_bonus",
      "env.capture_reward", "env.step_penalty", "env.arrival_prob", "run.episodes",
      "run.seed",         "run.threads",     "run.outcome",       "run.log",
      "cf.k",             "cf.epsilon_frac", "cf.mode",           "attr.method",
      "attr.m",           "attr.b",          "attr.alpha",        "scm.model",
      "scm.folds",        "scm.corr_threshold", "ci.tau_synergy", "ci.tau_si",
      "ci.ii_bins",       "explain.verbosity"};
  return keys;
}

namespace {

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
  }
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (v.empty() || v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

void apply_config_value(RunConfig& c, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  const std::string alpha_prefix = "policy.alpha.";
  if (key.rfind(alpha_prefix, 0) == 0) {
    const auto agent = parse_uint(key, key.substr(alpha_prefix.size()));
    c.alphas[static_cast<std::size_t>(agent)] = parse_real(key, v);
    return;
  }
  if (key == "env.name") c.env.name = v;
  else if (key == "env.horizon") c.env.horizon = static_cast<int>(parse_uint(key, v));
  else if (key == "env.grid_size") c.env.grid_size = static_cast<int>(parse_uint(key, v));
  else if (key == "env.collective_bonus") c.env.collective_bonus = parse_real(key, v);
  else if (key == "env.capture_reward") c.env.capture_reward = parse_real(key, v);
  else if (key == "env.step_penalty") c.env.step_penalty = parse_real(key, v);
  else if (key == "env.arrival_prob") c.env.arrival_prob = parse_real(key, v);
  else if (key == "run.episodes") c.n_episodes = parse_uint(key, v);
  else if (key == "run.seed") c.seed = parse_uint(key, v);
  else if (key == "run.threads") c.threads = parse_uint(key, v);
  else if (key == "run.outcome") c.outcome = outcome_kind_from_string(v);
  else if (key == "run.log") c.log_path = v;
  else if (key == "cf.k") c.K = parse_uint(key, v);
  else if (key == "cf.epsilon_frac") c.epsilon_frac = parse_real(key, v);
  else if (key == "cf.mode") c.mode = propagation_mode_from_string(v);
  else if (key == "attr.method") c.method = attr_method_from_string(v);
  else if (key == "attr.m") c.M = parse_uint(key, v);
  else if (key == "attr.b") c.B = parse_uint(key, v);
  else if (key == "attr.alpha") c.alpha_ci = parse_real(key, v);
  else if (key == "scm.model") c.model = model_kind_from_string(v);
  else if (key == "scm.folds") c.cv_folds = parse_uint(key, v);
  else if (key == "scm.corr_threshold") c.corr_threshold = parse_real(key, v);
  else if (key == "ci.tau_synergy") c.tau_synergy = parse_real(key, v);
  else if (key == "ci.tau_si") c.tau_si = parse_real(key, v);
  else if (key == "ci.ii_bins") c.ii_bins = parse_uint(key, v);
  else if (key == "explain.verbosity") c.verbosity = verbosity_from_string(v);
  else throw ConfigError("unknown config key '" + key + "'");
}

std::map<std::string, std::string> config_echo(const RunConfig& c) {
  std::map<std::string, std::string> m;
  m["env.name"] = c.env.name;
  m["env.horizon"] = std::to_string(c.env.horizon);
  m["env.grid_size"] = std::to_string(c.env.grid_size);
  m["env.collective_bonus"] = shortest(c.env.collective_bonus);
  m["env.capture_reward"] = shortest(c.env.capture_reward);
  m["env.step_penalty"] = shortest(c.env.step_penalty);
  m["env.arrival_prob"] = shortest(c.env.arrival_prob);
  m["run.episodes"] = std::to_string(c.n_episodes);
  m["run.seed"] = std::to_string(c.seed);
  m["run.outcome"] = to_string(c.outcome);
  m["run.log"] = c.log_path;
  m["cf.k"] = std::to_string(c.K);
  m["cf.epsilon_frac"] = shortest(c.epsilon_frac);
  m["cf.mode"] = to_string(c.mode);
  m["attr.method"] = to_string(c.method);
  m["attr.m"] = std::to_string(c.M);
  m["attr.b"] = std::to_string(c.B);
  m["attr.alpha"] = shortest(c.alpha_ci);
  m["scm.model"] = to_string(c.model);
  m["scm.folds"] = std::to_string(c.cv_folds);
  m["scm.corr_threshold"] = shortest(c.corr_threshold);
  m["ci.tau_synergy"] = shortest(c.tau_synergy);
  m["ci.tau_si"] = shortest(c.tau_si);
  m["ci.ii_bins"] = std::to_string(c.ii_bins);
  m["explain.verbosity"] = to_string(c.verbosity);
  for (const auto& [i, a] : c.alphas) m["policy.alpha." + std::to_string(i)] = shortest(a);
  // run.threads is deliberately absent: it never changes the numbers.
  return m;
}

void apply_config_text(RunConfig& c, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    apply_config_value(c, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

void apply_config_file(RunConfig& c, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  apply_config_text(c, ss.str());
}

void validate_config(const RunConfig& c) {
  if (c.K < 1) throw ConfigError("cf.k must be at least 1");
  if (c.B != 0 && c.B < 10) throw ConfigError("attr.b must be 0 (disabled) or at least 10");
  if (!(c.alpha_ci > 0.0 && c.alpha_ci < 1.0)) throw ConfigError("attr.alpha must lie in (0, 1)");
  if (c.tau_synergy < 0.0) throw ConfigError("ci.tau_synergy must be non-negative");
  if (c.tau_si < 0.0) throw ConfigError("ci.tau_si must be non-negative");
  if (c.epsilon_frac < 0.0) throw ConfigError("cf.epsilon_frac must be non-negative");
  if (c.ii_bins < 1) throw ConfigError("ci.ii_bins must be positive");
  if (c.cv_folds < 2) throw ConfigError("scm.folds must be at least 2");
  if (c.env.horizon < 1) throw ConfigError("env.horizon must be positive");
  for (const auto& [i, a] : c.alphas) {
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("policy.alpha." + std::to_string(i) + " must lie in [0, 1]");
  }
}

std::size_t default_m(std::size_t num_agents) { return num_agents == 2 ? 15 : 12; }

std::vector<double> resolved_alphas(const RunConfig& c, std::size_t n) {
  std::vector<double> a = default_skills(n);
  for (const auto& [i, v] : c.alphas) {
    if (i >= n) throw ConfigError("policy.alpha." + std::to_string(i) + " names a missing agent");
    a[i] = v;
  }
  return a;
}

History pipeline_history(const RunConfig& c) {
  if (!c.log_path.empty()) return load_episode_log(c.log_path);
  const auto env = make_env(c.env);
  const std::size_t n = c.n_episodes == 0 ? default_episode_count(c.env.name) : c.n_episodes;
  return simulate_history(*env, make_skill_policies(resolved_alphas(c, env->num_agents())), n,
                          SeedTree{c.seed}, resolve_threads(c.threads));
}

// ---------------------------------------------------------------------------------------
// Pipeline

const std::vector<std::string>& step_labels() {
  static const std::vector<std::string> labels = {"1", "2", "3", "3.5", "4", "5", "6", "7"};
  return labels;
}

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t ns_since(Clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0).count();
}

const char* step_title(std::size_t s) {
  static const char* titles[] = {"step 1 (causal model)",     "step 2 (counterfactual rollouts)",
                                 "step 3 (causal effects)",   "step 3.5 (collective metrics)",
                                 "step 4 (shapley values)",   "step 5 (normalize and rank)",
                                 "step 6 (bootstrap)",        "step 7 (explanations)"};
  return titles[s];
}

// Runs fn as step s, recording its duration and labelling any error with the step.
template <typename Fn>
void timed_step(Timings& t, std::size_t s, Fn&& fn) {
  const auto t0 = Clock::now();
  try {
    fn();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(step_title(s)) + ": " + e.what());
  } catch (const Error& e) {
    throw Error(std::string(step_title(s)) + ": " + e.what());
  }
  t.step_ns[s] = ns_since(t0);
}

double mean_over(const std::vector<double>& per_episode, std::span<const std::size_t> idx) {
  double s = 0.0;
  for (std::size_t e : idx) s += per_episode[e];
  return s / static_cast<double>(idx.size());
}

}  // namespace

Report run_pipeline(const RunConfig& config) {
  validate_config(config);
  const History history = pipeline_history(config);
  std::unique_ptr<Environment> env;
  if (config.mode == PropagationMode::env_resim || config.log_path.empty()) {
    EnvConfig ec = config.env;
    if (!config.log_path.empty()) ec.name = history.env_name;
    env = make_env(ec);
  }
  return run_pipeline(config, history, env.get());
}

Report run_pipeline(const RunConfig& config, const History& history, const Environment* env) {
  validate_config(config);
  if (history.empty()) throw Error("no episodes");
  check_history(history);
  const auto t_total = Clock::now();
  const std::size_t threads = resolve_threads(config.threads);
  const std::size_t n = history.num_agents;
  const std::size_t n_ep = history.size();
  const OutcomeSpec spec{config.outcome};
  const SeedTree tree{config.seed};
  if (env != nullptr && (env->num_agents() != n || env->state_dim() != history.state_dim())) {
    throw ConfigError("environment does not match the history");
  }
  const std::vector<double> alphas = resolved_alphas(config, n);
  const std::vector<PolicyPtr> policies = make_skill_policies(alphas);

  Report r;
  r.seed = config.seed;
  r.config = config_echo(config);
  r.env = history.env_name;
  r.num_agents = n;
  r.num_episodes = n_ep;
  r.outcome_kind = to_string(config.outcome);
  r.method = to_string(config.method);
  r.mode = to_string(config.mode);
  r.tau_si = config.tau_si;
  r.verbosity = to_string(config.verbosity);
  r.timings.step_ns.assign(step_labels().size(), 0);
  r.agents.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.agents[i].agent = i;
    r.agents[i].alpha = alphas[i];
  }

  SCModel scm;
  timed_step(r.timings, 0, [&] {
    FitOptions fo;
    fo.model = config.model;
    fo.seed = derive_seed(tree, "scm");
    fo.outcome = spec;
    fo.threads = threads;
    fo.num_actions = env != nullptr ? env->num_actions() : 0;
    scm = learn_scm(history, fo, config.corr_threshold, config.cv_folds);
    r.scm.model = to_string(config.model);
    r.scm.mean_r2 = scm.mean_validation_r2();
    for (const auto& eq : scm.equations()) r.scm.r2.push_back({scm.graph().name(eq.target), scm.validation_r2[eq.target]});
    for (const auto& e : inter_agent_edges(scm.graph())) r.scm.inter_agent_edges.emplace_back(e.source_agent, e.target_agent);
  });

  const std::unique_ptr<Simulator> sim = make_simulator(config.mode, env, policies, &scm, history, tree);

  std::vector<std::vector<CFSample>> samples(n);
  timed_step(r.timings, 1, [&] {
    CfOptions co;
    co.outcome = spec;
    co.epsilon_frac = config.epsilon_frac;
    co.threads = threads;
    for (std::size_t i = 0; i < n; ++i) samples[i] = intervene_and_rollout(*sim, history, i, config.K, co);
  });

  std::vector<double> fact_per_episode(n_ep);
  std::vector<double> phi_naive(n);
  timed_step(r.timings, 2, [&] {
    r.y_fact = outcome(history, spec);
    r.epsilon = config.epsilon_frac * std::abs(r.y_fact);
    for (std::size_t e = 0; e < n_ep; ++e) fact_per_episode[e] = outcome(history.episodes[e], spec);
    std::size_t len = static_cast<std::size_t>(std::max(sim->horizon(), 0));
    for (const Episode& ep : history.episodes) len = std::max(len, ep.length());
    const auto fact_trace = mean_trace(history, len, spec);
    for (std::size_t i = 0; i < n; ++i) {
      AgentReport& a = r.agents[i];
      a.y_cf = mean_counterfactual(samples[i]);
      a.phi_naive = causal_effect(r.y_fact, a.y_cf);
      phi_naive[i] = a.phi_naive;
      std::vector<double> mean_cf(len, 0.0);
      for (const auto& s : samples[i]) {
        a.samples.push_back({s.k, s.y, s.critical});
        for (std::size_t t = 0; t < len; ++t) mean_cf[t] += s.trace[t];
      }
      for (double& x : mean_cf) x /= static_cast<double>(samples[i].size());
      a.critical = critical_timesteps(fact_trace, mean_cf, r.epsilon);
    }
  });

  const ValueFunction v = ValueFunction::from_simulator(*sim, spec, threads);
  const Coalition full = full_coalition(n);
  timed_step(r.timings, 3, [&] {
    r.collective.sigma = synergy_matrix(v);
    r.collective.interactions = interactions(r.collective.sigma, config.tau_synergy);
    std::vector<double> solo(n);
    for (std::size_t i = 0; i < n; ++i) solo[i] = v(Coalition{1} << i);
    r.collective.si = synergy_index(v(full), solo);
    r.collective.cs = coordination_score(history);
    r.collective.ii = information_integration(history, config.ii_bins);
  });

  std::vector<double> phi;
  std::vector<Permutation> perms;
  timed_step(r.timings, 4, [&] {
    switch (config.method) {
      case AttrMethod::naive_cf: phi = phi_naive; break;
      case AttrMethod::shapley_exact: phi = shapley_exact(v); break;
      case AttrMethod::shapley_mc: {
        const std::size_t M = config.M == 0 ? default_m(n) : config.M;
        auto mc = shapley_mc_detailed(v, M, derive_seed(tree, "shapley"));
        phi = std::move(mc.phi);
        perms = std::move(mc.permutations);
        break;
      }
    }
    if (config.method != AttrMethod::naive_cf) {
      Efficiency& ef = r.efficiency;
      ef.applicable = true;
      ef.sum_phi = std::accumulate(phi.begin(), phi.end(), 0.0);
      ef.v_full = v(full);
      ef.v_empty = v(0);
      ef.abs_error = std::abs(ef.sum_phi - (ef.v_full - ef.v_empty));
      ef.rel_error = ef.abs_error / std::max(std::abs(ef.v_full - ef.v_empty), 1e-12);
    }
  });

  timed_step(r.timings, 5, [&] {
    const auto hat = normalize(phi);
    r.ranking = rank(phi);
    for (std::size_t i = 0; i < n; ++i) {
      r.agents[i].phi = phi[i];
      r.agents[i].phi_hat = hat[i];
      r.agents[i].ci_low = r.agents[i].ci_high = phi[i];
    }
    for (std::size_t p = 0; p < n; ++p) r.agents[r.ranking[p]].rank = p + 1;
  });

  timed_step(r.timings, 6, [&] {
    r.p_values.assign(n, std::vector<double>(n, 1.0));
    if (config.B == 0) return;
    IndexStatistic stat;
    std::vector<std::vector<double>> cf_mean(n, std::vector<double>(n_ep, 0.0));
    if (config.method == AttrMethod::naive_cf) {
      for (std::size_t i = 0; i < n; ++i) {
        for (const auto& s : samples[i]) {
          for (std::size_t e = 0; e < n_ep; ++e) cf_mean[i][e] += s.per_episode[e] / static_cast<double>(samples[i].size());
        }
      }
      stat = [&](std::span<const std::size_t> idx) {
        std::vector<double> out(n);
        const double f = mean_over(fact_per_episode, idx);
        for (std::size_t i = 0; i < n; ++i) out[i] = f - mean_over(cf_mean[i], idx);
        return out;
      };
    } else {
      stat = [&](std::span<const std::size_t> idx) {
        auto vb = [&](Coalition s) { return mean_over(v.evaluate(s).per_episode, idx); };
        if (config.method == AttrMethod::shapley_exact) return shapley_exact(n, vb);
        return shapley_from_permutations(n, perms, vb);
      };
    }
    const auto boot = bootstrap(n_ep, stat, config.B, config.alpha_ci, derive_seed(tree, "bootstrap"), threads);
    for (std::size_t i = 0; i < n; ++i) {
      r.agents[i].ci_low = boot.low[i];
      r.agents[i].ci_high = boot.high[i];
      r.agents[i].bootstrap_se = boot.std_error[i];
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) r.p_values[i][j] = compare_agents(boot.draws, phi, i, j);
      }
    }
  });

  timed_step(r.timings, 7, [&] {
    for (Coalition s : v.evaluated()) r.coalitions.push_back({members(s, n), v(s)});
    r.notes = {
        "SI denominator is max(|Y(A)|, |sum_i Y({i})|, 1e-9) rather than max(Y(A), sum_i Y({i})), "
        "so that SI > 0 exactly when the collective outcome exceeds the sum of solo outcomes.",
        "Coalition values are means over the analysed episodes with non-members on the uniform "
        "baseline and every agent on its factual noise stream (common random numbers).",
        "Pairwise synergy uses leave-one-out effects phi_i = Y(A) - Y(A \\ {i}) from the same "
        "coalition values.",
    };
    r.explanations = explain_report(r, config.verbosity);
  });

  r.timings.total_ns = ns_since(t_total);
  return r;
}

std::vector<ExplanationLine> explain_report(const Report& r, Verbosity verbosity) {
  std::vector<ExplanationLine> out;
  const double level = 1.0 - [&] {
    const auto it = r.config.find("attr.alpha");
    return it == r.config.end() ? 0.05 : std::stod(it->second);
  }();
  for (std::size_t idx : r.ranking) {
    const AgentReport& a = r.agents.at(idx);
    auto lines = explain_agent(a.agent, a.phi, a.phi_hat, a.critical, a.ci_low, a.ci_high, verbosity, level);
    out.insert(out.end(), lines.begin(), lines.end());
  }
  if (auto e = explain_emergence(r.collective.si, r.tau_si)) out.push_back(*e);
  const auto inter = explain_interactions(r.collective.interactions);
  out.insert(out.end(), inter.begin(), inter.end());
  if (!r.ranking.empty()) {
    const AgentReport& star = r.agents.at(r.ranking.front());
    out.push_back(explain_counterfactual(star.agent, star.phi_naive, r.y_fact, star.y_cf));
  }
  return out;
}

// ---------------------------------------------------------------------------------------
// JSON

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error("report: '" + where + "' must be an object");
  for (const auto& [k, _] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }) == allowed.end()) {
      throw Error("report: unknown field '" + k + "' in " + where);
    }
  }
  for (const char* a : allowed) {
    if (!j.contains(a)) throw Error("report: missing field '" + std::string(a) + "' in " + where);
  }
}

json line_json(const ExplanationLine& l) {
  return {{"kind", l.kind}, {"agents", l.agents}, {"numbers", l.numbers}, {"text", l.text}};
}

ExplanationLine line_from(const json& j) {
  check_keys(j, {"kind", "agents", "numbers", "text"}, "explanation line");
  return {j.at("kind").get<std::string>(), j.at("agents").get<std::vector<std::size_t>>(),
          j.at("numbers").get<std::vector<double>>(), j.at("text").get<std::string>()};
}

}  // namespace

std::string report_to_json(const Report& r, bool include_timings) {
  json j;
  j["version"] = r.version;
  j["seed"] = r.seed;
  j["config"] = r.config;
  j["env"] = r.env;
  j["num_agents"] = r.num_agents;
  j["num_episodes"] = r.num_episodes;
  j["outcome_kind"] = r.outcome_kind;
  j["method"] = r.method;
  j["mode"] = r.mode;
  j["y_fact"] = r.y_fact;
  j["epsilon"] = r.epsilon;
  json agents = json::array();
  for (const auto& a : r.agents) {
    json samples = json::array();
    for (const auto& s : a.samples) samples.push_back({{"k", s.k}, {"y", s.y}, {"critical", s.critical}});
    agents.push_back({{"agent", a.agent}, {"alpha", a.alpha}, {"phi", a.phi}, {"phi_hat", a.phi_hat},
                      {"rank", a.rank}, {"ci_low", a.ci_low}, {"ci_high", a.ci_high},
                      {"bootstrap_se", a.bootstrap_se}, {"phi_naive", a.phi_naive}, {"y_cf", a.y_cf},
                      {"critical", a.critical}, {"samples", samples}});
  }
  j["agents"] = agents;
  j["ranking"] = r.ranking;
  json coalitions = json::array();
  for (const auto& c : r.coalitions) coalitions.push_back({{"members", c.members}, {"value", c.value}});
  j["coalitions"] = coalitions;
  const Efficiency& ef = r.efficiency;
  j["efficiency"] = {{"applicable", ef.applicable}, {"sum_phi", ef.sum_phi}, {"v_full", ef.v_full},
                     {"v_empty", ef.v_empty}, {"abs_error", ef.abs_error}, {"rel_error", ef.rel_error}};
  json inter = json::array();
  for (const auto& e : r.collective.interactions) inter.push_back({{"i", e.i}, {"j", e.j}, {"sigma", e.sigma}});
  j["collective"] = {{"si", r.collective.si}, {"cs", r.collective.cs}, {"ii", r.collective.ii},
                     {"sigma", r.collective.sigma}, {"interactions", inter}, {"tau_si", r.tau_si}};
  j["p_values"] = r.p_values;
  json r2 = json::array();
  for (const auto& s : r.scm.r2) r2.push_back({{"node", s.node}, {"r2", s.r2}});
  json edges = json::array();
  for (const auto& [a, b] : r.scm.inter_agent_edges) edges.push_back({a, b});
  j["scm"] = {{"model", r.scm.model}, {"mean_r2", r.scm.mean_r2}, {"r2", r2}, {"inter_agent_edges", edges}};
  json lines = json::array();
  for (const auto& l : r.explanations) lines.push_back(line_json(l));
  j["explanations"] = {{"verbosity", r.verbosity}, {"lines", lines}};
  j["notes"] = r.notes;
  if (include_timings) {
    json steps = json::object();
    for (std::size_t s = 0; s < step_labels().size() && s < r.timings.step_ns.size(); ++s) {
      steps[step_labels()[s]] = r.timings.step_ns[s];
    }
    j["timings_ns"] = {{"steps", steps}, {"total", r.timings.total_ns}};
  }
  return j.dump(2) + "\n";
}

Report report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("report: invalid JSON: ") + e.what());
  }
  try {
    const bool timed = j.is_object() && j.contains("timings_ns");
    if (timed) {
      check_keys(j, {"version", "seed", "config", "env", "num_agents", "num_episodes", "outcome_kind", "method",
                     "mode", "y_fact", "epsilon", "agents", "ranking", "coalitions", "efficiency", "collective",
                     "p_values", "scm", "explanations", "notes", "timings_ns"},
                 "report");
    } else {
      check_keys(j, {"version", "seed", "config", "env", "num_agents", "num_episodes", "outcome_kind", "method",
                     "mode", "y_fact", "epsilon", "agents", "ranking", "coalitions", "efficiency", "collective",
                     "p_values", "scm", "explanations", "notes"},
                 "report");
    }
    Report r;
    r.version = j.at("version").get<int>();
    if (r.version != kReportVersion) {
      throw Error("report: unsupported version " + std::to_string(r.version));
    }
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config = j.at("config").get<std::map<std::string, std::string>>();
    r.env = j.at("env").get<std::string>();
    r.num_agents = j.at("num_agents").get<std::size_t>();
    r.num_episodes = j.at("num_episodes").get<std::size_t>();
    r.outcome_kind = j.at("outcome_kind").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
    r.y_fact = j.at("y_fact").get<double>();
    r.epsilon = j.at("epsilon").get<double>();
    for (const auto& a : j.at("agents")) {
      check_keys(a, {"agent", "alpha", "phi", "phi_hat", "rank", "ci_low", "ci_high", "bootstrap_se", "phi_naive",
                     "y_cf", "critical", "samples"},
                 "agent");
      AgentReport ar;
      ar.agent = a.at("agent").get<std::size_t>();
      ar.alpha = a.at("alpha").get<double>();
      ar.phi = a.at("phi").get<double>();
      ar.phi_hat = a.at("phi_hat").get<double>();
      ar.rank = a.at("rank").get<std::size_t>();
      ar.ci_low = a.at("ci_low").get<double>();
      ar.ci_high = a.at("ci_high").get<double>();
      ar.bootstrap_se = a.at("bootstrap_se").get<double>();
      ar.phi_naive = a.at("phi_naive").get<double>();
      ar.y_cf = a.at("y_cf").get<double>();
      ar.critical = a.at("critical").get<std::vector<int>>();
      for (const auto& s : a.at("samples")) {
        check_keys(s, {"k", "y", "critical"}, "counterfactual sample");
        ar.samples.push_back({s.at("k").get<std::size_t>(), s.at("y").get<double>(),
                              s.at("critical").get<std::vector<int>>()});
      }
      r.agents.push_back(std::move(ar));
    }
    r.ranking = j.at("ranking").get<std::vector<std::size_t>>();
    for (const auto& c : j.at("coalitions")) {
      check_keys(c, {"members", "value"}, "coalition");
      r.coalitions.push_back({c.at("members").get<std::vector<std::size_t>>(), c.at("value").get<double>()});
    }
    const json& ef = j.at("efficiency");
    check_keys(ef, {"applicable", "sum_phi", "v_full", "v_empty", "abs_error", "rel_error"}, "efficiency");
    r.efficiency = {ef.at("applicable").get<bool>(), ef.at("sum_phi").get<double>(), ef.at("v_full").get<double>(),
                    ef.at("v_empty").get<double>(), ef.at("abs_error").get<double>(), ef.at("rel_error").get<double>()};
    const json& co = j.at("collective");
    check_keys(co, {"si", "cs", "ii", "sigma", "interactions", "tau_si"}, "collective");
    r.collective.si = co.at("si").get<double>();
    r.collective.cs = co.at("cs").get<double>();
    r.collective.ii = co.at("ii").get<double>();
    r.collective.sigma = co.at("sigma").get<std::vector<std::vector<double>>>();
    for (const auto& e : co.at("interactions")) {
      check_keys(e, {"i", "j", "sigma"}, "interaction");
      r.collective.interactions.push_back({e.at("i").get<std::size_t>(), e.at("j").get<std::size_t>(),
                                           e.at("sigma").get<double>()});
    }
    r.tau_si = co.at("tau_si").get<double>();
    r.p_values = j.at("p_values").get<std::vector<std::vector<double>>>();
    const json& sc = j.at("scm");
    check_keys(sc, {"model", "mean_r2", "r2", "inter_agent_edges"}, "scm");
    r.scm.model = sc.at("model").get<std::string>();
    r.scm.mean_r2 = sc.at("mean_r2").get<double>();
    for (const auto& s : sc.at("r2")) {
      check_keys(s, {"node", "r2"}, "scm r2 entry");
      r.scm.r2.push_back({s.at("node").get<std::string>(), s.at("r2").get<double>()});
    }
    for (const auto& e : sc.at("inter_agent_edges")) {
      r.scm.inter_agent_edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    }
    const json& ex = j.at("explanations");
    check_keys(ex, {"verbosity", "lines"}, "explanations");
    r.verbosity = ex.at("verbosity").get<std::string>();
    for (const auto& l : ex.at("lines")) r.explanations.push_back(line_from(l));
    r.notes = j.at("notes").get<std::vector<std::string>>();
    r.timings.step_ns.assign(step_labels().size(), 0);
    if (timed) {
      const json& t = j.at("timings_ns");
      check_keys(t, {"steps", "total"}, "timings_ns");
      const json& steps = t.at("steps");
      for (const auto& [k, _] : steps.items()) {
        if (std::find(step_labels().begin(), step_labels().end(), k) == step_labels().end()) {
          throw Error("report: unknown step '" + k + "' in timings_ns");
        }
      }
      for (std::size_t s = 0; s < step_labels().size(); ++s) {
        r.timings.step_ns[s] = steps.at(step_labels()[s]).get<std::int64_t>();
      }
      r.timings.total_ns = t.at("total").get<std::int64_t>();
    }
    if (r.agents.size() != r.num_agents || r.ranking.size() != r.num_agents) {
      throw Error("report: agent count disagrees with num_agents");
    }
    for (std::size_t idx : r.ranking) {
      if (idx >= r.agents.size()) throw Error("report: ranking names a missing agent");
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(std::string("report: ") + e.what());
  }
}

Report load_report(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot read report: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return report_from_json(ss.str());
}

// ---------------------------------------------------------------------------------------
// Files

ReportFormat report_format_from_string(const std::string& text) {
  if (text == "json") return ReportFormat::json;
  if (text == "csv") return ReportFormat::csv;
  if (text == "plotdata") return ReportFormat::plotdata;
  throw ConfigError("unknown report format '" + text + "' (valid: json, csv, plotdata)");
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write file: " + path);
  return f;
}

void close_out(std::ofstream& f, const std::string& path) {
  f.close();
  if (!f) throw Error("error writing file: " + path);
}

std::string stem_of(const std::string& path) {
  std::filesystem::path p(path);
  return (p.parent_path() / p.stem()).string();
}

std::string top_agent(const Report& r) {
  return r.ranking.empty() ? "" : "Agent " + std::to_string(r.ranking.front() + 1);
}

}  // namespace

void write_dataset_table(const std::vector<Report>& reports, const std::string& path) {
  auto f = open_out(path);
  f << "dataset,agents,episodes,mean_outcome,si,cs,ii,top_agent,runtime_s\n";
  for (const auto& r : reports) {
    f << r.env << ',' << r.num_agents << ',' << r.num_episodes << ',' << fixed(r.y_fact, 3) << ','
      << fixed(r.collective.si, 3) << ',' << fixed(r.collective.cs, 3) << ',' << fixed(r.collective.ii, 3) << ','
      << top_agent(r) << ',' << fixed(static_cast<double>(r.timings.total_ns) * 1e-9, 3) << '\n';
  }
  close_out(f, path);
}

std::vector<std::string> write_report(const Report& r, ReportFormat format, const std::string& path) {
  std::vector<std::string> written;
  switch (format) {
    case ReportFormat::json: {
      auto f = open_out(path);
      f << report_to_json(r);
      close_out(f, path);
      written.push_back(path);
      break;
    }
    case ReportFormat::csv: {
      const std::string stem = stem_of(path);
      write_dataset_table({r}, stem + "_datasets.csv");
      const std::string agents = stem + "_agents.csv";
      auto f = open_out(agents);
      f << "dataset,agent,phi,phi_hat,ci_low,ci_high,rank\n";
      for (const auto& a : r.agents) {
        f << r.env << ',' << a.agent + 1 << ',' << fixed(a.phi, 3) << ',' << fixed(a.phi_hat, 3) << ','
          << fixed(a.ci_low, 3) << ',' << fixed(a.ci_high, 3) << ',' << a.rank << '\n';
      }
      close_out(f, agents);
      written = {stem + "_datasets.csv", agents};
      break;
    }
    case ReportFormat::plotdata: {
      const std::string stem = stem_of(path);
      const std::string bars = stem + "_attribution.dat";
      auto f = open_out(bars);
      f << "# agent phi_hat ci_low ci_high\n";
      for (const auto& a : r.agents) {
        f << a.agent + 1 << ' ' << shortest(a.phi_hat) << ' ' << shortest(a.ci_low) << ' ' << shortest(a.ci_high)
          << '\n';
      }
      close_out(f, bars);
      const std::string runtime = stem + "_runtime.dat";
      auto g = open_out(runtime);
      g << "# step ns fraction\n";
      const double total = static_cast<double>(std::max<std::int64_t>(r.timings.total_ns, 1));
      for (std::size_t s = 0; s < step_labels().size(); ++s) {
        g << step_labels()[s] << ' ' << r.timings.step_ns[s] << ' '
          << shortest(static_cast<double>(r.timings.step_ns[s]) / total) << '\n';
      }
      close_out(g, runtime);
      written = {bars, runtime};
      break;
    }
  }
  return written;
}

// ---------------------------------------------------------------------------------------
// Benchmarks

std::vector<RunConfig> builtin_configs(std::uint64_t seed) {
  std::vector<RunConfig> out;
  for (const auto& name : env_names()) {
    RunConfig c;
    c.env.name = name;
    c.seed = seed;
    c.threads = 1;
    out.push_back(c);
  }
  return out;
}

std::vector<BenchRow> bench(const std::vector<RunConfig>& configs) {
  std::vector<BenchRow> rows;
  for (const auto& c : configs) {
    const Report r = run_pipeline(c);
    BenchRow row;
    row.env = r.env;
    row.episodes = r.num_episodes;
    row.timings = r.timings;
    const double total = static_cast<double>(std::max<std::int64_t>(r.timings.total_ns, 1));
    for (auto ns : r.timings.step_ns) row.fractions.push_back(static_cast<double>(ns) / total);
    const auto top = std::max_element(r.timings.step_ns.begin(), r.timings.step_ns.end());
    row.counterfactual_dominant = top - r.timings.step_ns.begin() == 1;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_bench(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "env           episodes  total_ms";
  for (const auto& l : step_labels()) out << "  step" << l;
  out << "  cf_dominant\n";
  std::int64_t grand = 0;
  for (const auto& r : rows) {
    std::string env = r.env;
    env.resize(std::max<std::size_t>(env.size(), 13), ' ');
    out << env << ' ' << r.episodes << "        " << fixed(static_cast<double>(r.timings.total_ns) * 1e-6, 1);
    for (double f : r.fractions) out << "  " << fixed(100.0 * f, 1) << '%';
    out << "  " << (r.counterfactual_dominant ? "yes" : "no") << '\n';
    grand += r.timings.total_ns;
  }
  out << "total_s " << fixed(static_cast<double>(grand) * 1e-9, 3) << '\n';
  return out.str();
}

std::vector<ConvergencePoint> k_convergence(const RunConfig& config, const std::vector<std::size_t>& Ks) {
  validate_config(config);
  if (Ks.empty()) throw ConfigError("k_convergence needs at least one K");
  const std::size_t k_max = *std::max_element(Ks.begin(), Ks.end());
  if (*std::min_element(Ks.begin(), Ks.end()) < 1) throw ConfigError("K must be at least 1");
  const History history = pipeline_history(config);
  const auto env = make_env(config.env);
  const std::size_t n = history.num_agents;
  const std::size_t n_ep = history.size();
  const OutcomeSpec spec{config.outcome};
  const std::size_t threads = resolve_threads(config.threads);
  std::vector<std::uint64_t> seeds;
  for (const Episode& ep : history.episodes) seeds.push_back(ep.seed);
  const EnvSimulator sim(*env, make_skill_policies(resolved_alphas(config, n)),
                         std::make_shared<BaselinePolicy>(env->num_actions()), seeds);
  CfOptions co;
  co.outcome = spec;
  co.threads = threads;
  std::vector<std::vector<CFSample>> samples(n);
  for (std::size_t i = 0; i < n; ++i) samples[i] = intervene_and_rollout(sim, history, i, k_max, co);
  std::vector<double> fact(n_ep);
  for (std::size_t e = 0; e < n_ep; ++e) fact[e] = outcome(history.episodes[e], spec);
  const std::size_t B = config.B == 0 ? 100 : config.B;
  const std::uint64_t boot_seed = derive_seed(SeedTree{config.seed}, "bootstrap");

  std::vector<ConvergencePoint> out;
  for (std::size_t K : Ks) {
    std::vector<std::vector<double>> cf(n, std::vector<double>(n_ep, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t e = 0; e < n_ep; ++e) cf[i][e] += samples[i][k].per_episode[e] / static_cast<double>(K);
      }
    }
    std::vector<std::size_t> all(n_ep);
    std::iota(all.begin(), all.end(), std::size_t{0});
    auto stat = [&](std::span<const std::size_t> idx) {
      std::vector<double> phi(n);
      const double f = mean_over(fact, idx);
      for (std::size_t i = 0; i < n; ++i) phi[i] = f - mean_over(cf[i], idx);
      return phi;
    };
    ConvergencePoint p;
    p.K = K;
    p.phi = stat(all);
    p.std_error = bootstrap(n_ep, stat, B, config.alpha_ci, boot_seed, threads).std_error;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace macie
