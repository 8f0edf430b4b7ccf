#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "macie/envs.hpp"
#include "macie/explain.hpp"
#include "macie/format.hpp"
#include "macie/report.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Flag values as typed on the command line; applied after the config file so flags win.
struct RunFlags {
  std::string config_path;
  std::string out = "report.json";
  std::string format = "json";
  std::map<std::string, std::string> values;  // config key -> text
  std::vector<std::string> sets;              // raw key=value overrides
  bool quiet = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config_path, "Config file with 'key = value' lines");
  cmd->add_option("--out", f.out, "Report output path")->capture_default_str();
  cmd->add_option("--format", f.format, "Report format: json, csv, plotdata")->capture_default_str();
  struct Mapped {
    const char* flag;
    const char* key;
    const char* help;
  };
  static const Mapped mapped[] = {
      {"--env", "env.name", "Environment name (see list-envs)"},
      {"--episodes", "run.episodes", "Number of episodes (default: dataset size)"},
      {"--horizon", "env.horizon", "Episode horizon"},
      {"--k", "cf.k", "Counterfactual samples per agent"},
      {"--m", "attr.m", "Monte Carlo permutations (0: by agent count)"},
      {"--b", "attr.b", "Bootstrap resamples (0 disables intervals)"},
      {"--alpha-ci", "attr.alpha", "Interval miscoverage level"},
      {"--method", "attr.method", "naive_cf, shapley_exact or shapley_mc"},
      {"--model", "scm.model", "constant_mean, linear or tree_ensemble"},
      {"--mode", "cf.mode", "env_resim or scm_rollout"},
      {"--outcome", "run.outcome", "Outcome definition"},
      {"--seed", "run.seed", "Master seed"},
      {"--threads", "run.threads", "Worker threads (0: MACIE_THREADS or hardware)"},
      {"--verbosity", "explain.verbosity", "concise, detailed or full"},
  };
  for (const auto& m : mapped) {
    cmd->add_option_function<std::string>(
        m.flag, [&f, key = std::string(m.key)](const std::string& v) { f.values[key] = v; }, m.help);
  }
  cmd->add_option("--set", f.sets, "Override any config key: key=value (repeatable)");
  cmd->add_flag("--quiet", f.quiet, "Do not print explanations");
}

macie::RunConfig build_config(const RunFlags& f) {
  macie::RunConfig c;
  if (!f.config_path.empty()) macie::apply_config_file(c, f.config_path);
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw macie::ConfigError("--set expects key=value, got '" + kv + "'");
    macie::apply_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  for (const auto& [k, v] : f.values) macie::apply_config_value(c, k, v);
  macie::validate_config(c);
  return c;
}

void run_and_write(const macie::RunConfig& c, const RunFlags& f) {
  const auto format = macie::report_format_from_string(f.format);
  const macie::Report r = macie::run_pipeline(c);
  for (const auto& path : macie::write_report(r, format, f.out)) std::cerr << "wrote " << path << '\n';
  if (!f.quiet) std::cout << macie::join_text(r.explanations) << '\n';
}

void list_envs() {
  for (const auto& name : macie::env_names()) {
    macie::EnvConfig ec;
    ec.name = name;
    const auto env = macie::make_env(ec);
    std::cout << name << "  agents=" << env->num_agents() << "  actions=" << env->num_actions()
              << "  episodes=" << macie::default_episode_count(name) << "  state=["
              << macie::join(env->feature_layout(), ", ") << "]\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal attribution and collective-behaviour explanations for multi-agent episodes"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Simulate a built-in environment and analyse it");
  add_run_flags(run, run_flags);

  RunFlags ingest_flags;
  std::string log_path;
  auto* ingest = app.add_subcommand("ingest", "Analyse an episode log");
  ingest->add_option("--log", log_path, "Episode log file")->required();
  add_run_flags(ingest, ingest_flags);

  std::string report_path;
  std::string verbosity;
  auto* explain = app.add_subcommand("explain", "Render explanations from a stored report");
  explain->add_option("--report", report_path, "Report JSON")->required();
  explain->add_option("--verbosity", verbosity, "concise, detailed or full");

  bool all = false;
  std::uint64_t bench_seed = 42;
  std::vector<std::string> bench_envs;
  auto* bench = app.add_subcommand("bench", "Time the pipeline on the built-in datasets");
  bench->add_flag("--all", all, "All built-in environments");
  bench->add_option("--env", bench_envs, "Restrict to these environments");
  bench->add_option("--seed", bench_seed, "Master seed")->capture_default_str();

  auto* list = app.add_subcommand("list-envs", "Describe the built-in environments");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) {
      run_and_write(build_config(run_flags), run_flags);
    } else if (*ingest) {
      RunFlags f = ingest_flags;
      // Logged episodes have no simulator unless the user asks for one explicitly.
      if (!f.values.count("cf.mode")) f.values["cf.mode"] = "scm_rollout";
      f.values["run.log"] = log_path;
      run_and_write(build_config(f), f);
    } else if (*explain) {
      macie::Report r = macie::load_report(report_path);
      const auto level = verbosity.empty() ? macie::verbosity_from_string(r.verbosity)
                                           : macie::verbosity_from_string(verbosity);
      std::cout << macie::join_text(macie::explain_report(r, level)) << '\n';
    } else if (*bench) {
      auto configs = macie::builtin_configs(bench_seed);
      if (!all) {
        if (bench_envs.empty()) throw macie::ConfigError("bench needs --all or --env <name>");
        std::vector<macie::RunConfig> chosen;
        for (const auto& name : bench_envs) {
          bool found = false;
          for (const auto& c : configs) {
            if (c.env.name == name) {
              chosen.push_back(c);
              found = true;
            }
          }
          if (!found) throw macie::ConfigError("unknown environment '" + name + "'");
        }
        configs = std::move(chosen);
      }
      std::cout << macie::format_bench(macie::bench(configs));
    } else if (*list) {
      list_envs();
    }
  } catch (const macie::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
