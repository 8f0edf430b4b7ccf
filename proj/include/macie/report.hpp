#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "macie/attribution.hpp"
#include "macie/collective.hpp"
#include "macie/counterfactual.hpp"
#include "macie/envs.hpp"
#include "macie/explain.hpp"
#include "macie/regression.hpp"

namespace macie {

inline constexpr int kReportVersion = 1;

struct RunConfig {
  EnvConfig env;
  std::size_t n_episodes = 0;  // 0: the environment's built-in dataset size
  std::size_t K = 5;
  std::size_t M = 0;           // 0: 15 for two agents, 12 otherwise
  std::size_t B = 100;         // 0 disables bootstrap intervals
  double alpha_ci = 0.05;
  double tau_synergy = 0.05;
  double tau_si = 0.1;
  double epsilon_frac = 0.1;
  AttrMethod method = AttrMethod::shapley_mc;
  ModelKind model = ModelKind::tree_ensemble;
  PropagationMode mode = PropagationMode::env_resim;
  OutcomeKind outcome = OutcomeKind::cumulative_team_reward;
  std::uint64_t seed = 42;
  Verbosity verbosity = Verbosity::detailed;
  std::map<std::size_t, double> alphas;  // per-agent skill overrides
  std::size_t threads = 0;               // 0: MACIE_THREADS or hardware
  std::size_t ii_bins = 4;
  std::size_t cv_folds = 5;
  double corr_threshold = 0.1;
  std::string log_path;                  // ingest this episode log instead of simulating
};

// Every recognised config key, in canonical order.
const std::vector<std::string>& config_keys();
void apply_config_value(RunConfig& config, const std::string& key, const std::string& value);
// Canonical key -> value text for every key (policy.alpha.<i> only when set).
std::map<std::string, std::string> config_echo(const RunConfig& config);
// "key = value" lines; '#' starts a comment.
void apply_config_file(RunConfig& config, const std::string& path);
void apply_config_text(RunConfig& config, const std::string& text);
void validate_config(const RunConfig& config);

std::size_t default_m(std::size_t num_agents);

struct CfSummary {
  std::size_t k = 0;
  double y = 0.0;
  std::vector<int> critical;

  friend bool operator==(const CfSummary&, const CfSummary&) = default;
};

struct AgentReport {
  std::size_t agent = 0;
  double alpha = 0.0;
  double phi = 0.0;
  double phi_hat = 0.0;
  std::size_t rank = 0;  // 1 = largest |phi|
  double ci_low = 0.0;
  double ci_high = 0.0;
  double bootstrap_se = 0.0;
  double phi_naive = 0.0;
  double y_cf = 0.0;
  std::vector<int> critical;
  std::vector<CfSummary> samples;

  friend bool operator==(const AgentReport&, const AgentReport&) = default;
};

struct CoalitionEntry {
  std::vector<std::size_t> members;
  double value = 0.0;

  friend bool operator==(const CoalitionEntry&, const CoalitionEntry&) = default;
};

struct Efficiency {
  bool applicable = false;
  double sum_phi = 0.0;
  double v_full = 0.0;
  double v_empty = 0.0;
  double abs_error = 0.0;
  double rel_error = 0.0;

  friend bool operator==(const Efficiency&, const Efficiency&) = default;
};

struct NodeScore {
  std::string node;
  double r2 = 0.0;

  friend bool operator==(const NodeScore&, const NodeScore&) = default;
};

struct ScmSummary {
  std::string model;
  double mean_r2 = 0.0;
  std::vector<NodeScore> r2;
  std::vector<std::pair<std::size_t, std::size_t>> inter_agent_edges;

  friend bool operator==(const ScmSummary&, const ScmSummary&) = default;
};

// Step labels in execution order.
const std::vector<std::string>& step_labels();

struct Timings {
  std::vector<std::int64_t> step_ns;  // aligned with step_labels()
  std::int64_t total_ns = 0;

  friend bool operator==(const Timings&, const Timings&) = default;
};

struct Report {
  int version = kReportVersion;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config;
  std::string env;
  std::size_t num_agents = 0;
  std::size_t num_episodes = 0;
  std::string outcome_kind;
  std::string method;
  std::string mode;
  double y_fact = 0.0;
  double epsilon = 0.0;
  std::vector<AgentReport> agents;
  std::vector<std::size_t> ranking;
  std::vector<CoalitionEntry> coalitions;
  Efficiency efficiency;
  CollectiveMetrics collective;
  double tau_si = 0.1;
  std::vector<std::vector<double>> p_values;
  ScmSummary scm;
  std::string verbosity;
  std::vector<ExplanationLine> explanations;
  std::vector<std::string> notes;
  Timings timings;

  friend bool operator==(const Report&, const Report&) = default;
};

Report run_pipeline(const RunConfig& config);
// Runs on a supplied history (for ingested logs); `env` may be null for scm_rollout.
Report run_pipeline(const RunConfig& config, const History& history, const Environment* env);

// History the pipeline analyses for this config: the ingested log when log_path is set,
// otherwise simulated episodes under the configured skills.
History pipeline_history(const RunConfig& config);
std::vector<double> resolved_alphas(const RunConfig& config, std::size_t num_agents);

// Structured explanation lines rendered from report data alone.
std::vector<ExplanationLine> explain_report(const Report& report, Verbosity verbosity);

std::string report_to_json(const Report& report, bool include_timings = true);
Report report_from_json(const std::string& text);
Report load_report(const std::string& path);

enum class ReportFormat { json, csv, plotdata };
ReportFormat report_format_from_string(const std::string& text);
// Writes the report. json goes to `path`; csv writes <stem>_datasets.csv and
// <stem>_agents.csv; plotdata writes <stem>_attribution.dat and <stem>_runtime.dat.
// Returns the files written.
std::vector<std::string> write_report(const Report& report, ReportFormat format, const std::string& path);
// Table with one row per report, mirroring the per-dataset results table.
void write_dataset_table(const std::vector<Report>& reports, const std::string& path);

struct BenchRow {
  std::string env;
  std::size_t episodes = 0;
  Timings timings;
  std::vector<double> fractions;  // aligned with step_labels()
  bool counterfactual_dominant = false;
};

std::vector<RunConfig> builtin_configs(std::uint64_t seed = 42);
std::vector<BenchRow> bench(const std::vector<RunConfig>& configs);
std::string format_bench(const std::vector<BenchRow>& rows);

struct ConvergencePoint {
  std::size_t K = 0;
  std::vector<double> phi;       // naive counterfactual effects
  std::vector<double> std_error; // bootstrap standard errors
};

// Naive counterfactual effects and their bootstrap standard errors for each K. Sample k
// uses the same stream for every K and all K share one resample schedule.
std::vector<ConvergencePoint> k_convergence(const RunConfig& config, const std::vector<std::size_t>& Ks);

}  // namespace macie
