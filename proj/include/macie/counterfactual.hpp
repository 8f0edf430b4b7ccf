#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "macie/core.hpp"
#include "macie/envs.hpp"
#include "macie/policies.hpp"
#include "macie/rng.hpp"
#include "macie/scm.hpp"

namespace macie {

enum class PropagationMode { env_resim, scm_rollout };
std::string to_string(PropagationMode mode);
PropagationMode propagation_mode_from_string(const std::string& text);

// How one agent behaves in a rollout.
enum class Role { policy, baseline };

struct AgentPlan {
  Role role = Role::policy;
  // Replaces the agent's own per-episode noise stream when set.
  std::optional<RngStream> noise;
};
using Plan = std::vector<AgentPlan>;

// Per-episode stream layout: with s = episode seed and tree {s}, the initial state uses
// reset(s), environment noise "env", and agent i's action noise "agent" [i].
RngStream env_stream(std::uint64_t episode_seed);
RngStream agent_stream(std::uint64_t episode_seed, std::size_t agent);
// Intervention noise for counterfactual sample k of agent i: (s, "cf", [i, k]).
RngStream cf_stream(std::uint64_t episode_seed, std::size_t agent, std::size_t k);
std::vector<std::uint64_t> episode_seeds(const SeedTree& tree, std::size_t n_episodes);

Episode run_episode(const Environment& env, const std::vector<PolicyPtr>& policies,
                    std::uint64_t episode_seed, const std::vector<std::optional<RngStream>>& noise = {});
History simulate_history(const Environment& env, const std::vector<PolicyPtr>& policies,
                         std::size_t n_episodes, const SeedTree& tree, std::size_t threads = 1);

// Replays episodes of a fixed seed schedule under a per-agent plan.
class Simulator {
 public:
  virtual ~Simulator() = default;
  virtual std::size_t num_agents() const = 0;
  virtual std::size_t num_episodes() const = 0;
  virtual int horizon() const = 0;
  virtual std::uint64_t episode_seed(std::size_t episode) const = 0;
  virtual Episode rollout(std::size_t episode, const Plan& plan) const = 0;
};

class EnvSimulator final : public Simulator {
 public:
  // One baseline shared by all agents.
  EnvSimulator(const Environment& env, std::vector<PolicyPtr> policies, PolicyPtr baseline,
               std::vector<std::uint64_t> seeds);
  // One baseline per agent.
  EnvSimulator(const Environment& env, std::vector<PolicyPtr> policies,
               std::vector<PolicyPtr> baselines, std::vector<std::uint64_t> seeds);

  std::size_t num_agents() const override { return policies_.size(); }
  std::size_t num_episodes() const override { return seeds_.size(); }
  int horizon() const override { return env_.horizon(); }
  std::uint64_t episode_seed(std::size_t episode) const override { return seeds_.at(episode); }
  Episode rollout(std::size_t episode, const Plan& plan) const override;

 private:
  const Environment& env_;
  std::vector<PolicyPtr> policies_;
  std::vector<PolicyPtr> baselines_;
  std::vector<std::uint64_t> seeds_;
};

// Rolls the learned SCM forward from each recorded episode's initial state for that
// episode's length. Policy-role agents take the SCM's predicted action; baseline agents
// draw uniformly from `action_space_size` actions. The per-agent reward is the predicted
// team reward split evenly.
class ScmSimulator final : public Simulator {
 public:
  ScmSimulator(const SCModel& scm, const History& factual, std::size_t action_space_size,
               const SeedTree& tree);

  std::size_t num_agents() const override { return factual_.num_agents; }
  std::size_t num_episodes() const override { return factual_.size(); }
  int horizon() const override { return factual_.horizon; }
  std::uint64_t episode_seed(std::size_t episode) const override { return seeds_.at(episode); }
  Episode rollout(std::size_t episode, const Plan& plan) const override;

 private:
  const SCModel& scm_;
  const History& factual_;
  std::size_t actions_;
  std::vector<std::uint64_t> seeds_;
};

// Throws when the mode's backing model is missing.
std::unique_ptr<Simulator> make_simulator(PropagationMode mode, const Environment* env,
                                          const std::vector<PolicyPtr>& policies,
                                          const SCModel* scm, const History& factual,
                                          const SeedTree& tree);

enum class NoiseMode {
  fresh,   // intervened agent draws from the (seed, "cf", [i, k]) stream
  common,  // intervened agent reuses its factual stream
};

struct CfOptions {
  OutcomeSpec outcome;
  double epsilon_frac = 0.1;  // critical threshold as a fraction of |Y_fact|
  NoiseMode noise = NoiseMode::fresh;
  std::size_t threads = 1;
};

struct CFSample {
  AgentId agent;
  std::size_t k = 0;
  std::vector<double> trace;         // mean cumulative outcome per timestep
  double y = 0.0;                    // equals trace.back()
  std::vector<int> critical;         // 1-based timesteps
  std::vector<double> per_episode;   // outcome of each counterfactual episode

  friend bool operator==(const CFSample&, const CFSample&) = default;
};

// K counterfactual histories in which `agent` follows the baseline at every timestep
// while the rest keep their roles; other agents and the environment keep their factual
// streams.
std::vector<CFSample> intervene_and_rollout(const Simulator& sim, const History& factual,
                                            std::size_t agent, std::size_t K,
                                            const CfOptions& options = {});

using Coalition = std::uint64_t;  // bit i set when agent i is a member

std::vector<std::size_t> members(Coalition s, std::size_t num_agents);
Coalition full_coalition(std::size_t num_agents);

struct CoalitionValue {
  Coalition coalition = 0;
  double value = 0.0;
  std::size_t episodes_used = 0;
  std::vector<double> per_episode;
};

// Members follow their policies and the rest the baseline, every agent on its factual
// noise stream, so the full coalition reproduces the factual episodes exactly.
CoalitionValue coalition_outcome(Coalition s, const Simulator& sim, const OutcomeSpec& spec = {},
                                 std::size_t threads = 1);

// {t : |cf(t) - fact(t)| > epsilon}, 1-based; the shorter trace is zero-padded.
std::vector<int> critical_timesteps(const std::vector<double>& factual_trace,
                                    const std::vector<double>& cf_trace, double epsilon);

}  // namespace macie
