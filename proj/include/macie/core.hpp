#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace macie {

// Base error for everything raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or arguments supplied by the caller (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

using ActionId = int;
using StateVec = std::vector<double>;
using JointAction = std::vector<ActionId>;

struct AgentId {
  std::size_t index = 0;

  friend bool operator==(AgentId, AgentId) = default;
  friend auto operator<=>(AgentId, AgentId) = default;
};

struct Step {
  StateVec state;
  JointAction joint_action;
  std::vector<double> rewards;
  double team_reward = 0.0;

  friend bool operator==(const Step&, const Step&) = default;
};

struct Episode {
  std::vector<Step> steps;
  // State reached after the last step; empty when unknown.
  StateVec final_state;
  std::string env_name;
  std::uint64_t seed = 0;
  int horizon = 0;
  // True when the episode reached the environment's goal condition (not just the horizon).
  bool terminated = false;

  std::size_t length() const { return steps.size(); }
  friend bool operator==(const Episode&, const Episode&) = default;
};

struct History {
  std::string env_name;
  std::size_t num_agents = 0;
  int horizon = 0;
  std::vector<std::string> feature_layout;
  std::vector<Episode> episodes;

  bool empty() const { return episodes.empty(); }
  std::size_t size() const { return episodes.size(); }
  std::size_t state_dim() const { return feature_layout.size(); }

  // Copy of this history holding the episodes at the given indices (with repeats).
  History resample(std::span<const std::size_t> indices) const;

  friend bool operator==(const History&, const History&) = default;
};

// Throws Error when the episodes disagree on env, agent count or feature layout.
void check_history(const History& history);

enum class OutcomeKind { cumulative_team_reward, terminal_success_indicator };

struct OutcomeSpec {
  OutcomeKind kind = OutcomeKind::cumulative_team_reward;
};

std::string to_string(OutcomeKind kind);
OutcomeKind outcome_kind_from_string(const std::string& text);

double outcome(const Episode& episode, const OutcomeSpec& spec = {});
double outcome(const History& history, const OutcomeSpec& spec = {});

// Prefix outcome Y(t) for t = 1..length; the last entry equals outcome(episode).
std::vector<double> cumulative_trace(const Episode& episode, const OutcomeSpec& spec = {});

// Mean per-timestep trace over a history, each episode padded to `length` with its
// terminal value.
std::vector<double> mean_trace(const History& history, std::size_t length,
                               const OutcomeSpec& spec = {});

double team_reward_sum(std::span<const double> rewards);

}  // namespace macie
