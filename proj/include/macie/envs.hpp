#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "macie/core.hpp"
#include "macie/rng.hpp"

namespace macie {

struct EnvConfig {
  std::string name = "gridworld";
  int horizon = 18;
  // Grid width for the grid environments; 0 selects the environment default
  // (gridworld 5, predatorprey 7).
  int grid_size = 0;
  // gridworld: team bonus when both agents stand on their goals at the same step.
  double collective_bonus = 5.0;
  // predatorprey: reward each predator receives on capture, and per-step cost.
  double capture_reward = 10.0;
  double step_penalty = 0.05;
  // traffic: Bernoulli arrival probability per direction per step.
  double arrival_prob = 0.3;

  friend bool operator==(const EnvConfig&, const EnvConfig&) = default;
};

struct EnvState {
  StateVec features;
  int t = 0;
  bool done = false;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct StepResult {
  EnvState next;
  std::vector<double> rewards;
  double team_reward = 0.0;
  bool done = false;
  // Ended by the environment's own goal condition rather than the horizon.
  bool terminal = false;
};

// A discrete-action multi-agent environment. Instances are immutable; all episode
// state lives in EnvState and the caller-supplied stream, so one instance can serve
// many concurrent rollouts.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual std::size_t num_agents() const = 0;
  virtual std::size_t num_actions() const = 0;
  virtual std::vector<std::string> action_names() const = 0;
  virtual std::vector<std::string> feature_layout() const = 0;
  virtual int horizon() const = 0;

  virtual EnvState reset(std::uint64_t seed) const = 0;
  // `env_rng` supplies the environment's own stochasticity for this episode.
  virtual StepResult step(const EnvState& state, const JointAction& joint_action,
                          RngStream& env_rng) const = 0;
  // Distance-greedy heuristic action for `agent`; ties resolve to the lowest index.
  virtual ActionId greedy_action(const EnvState& state, std::size_t agent) const = 0;

  std::size_t state_dim() const { return feature_layout().size(); }

 protected:
  void check_actions(const JointAction& joint_action) const;
};

std::unique_ptr<Environment> make_env(const EnvConfig& config);
std::vector<std::string> env_names();
// Per-environment episode counts used for the built-in datasets.
std::size_t default_episode_count(const std::string& env_name);

// Grid moves shared by the grid environments, indexed by ActionId.
inline constexpr int kMoveDx[5] = {0, 0, -1, 1, 0};
inline constexpr int kMoveDy[5] = {1, -1, 0, 0, 0};
enum Move : ActionId { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kStay = 4 };

}  // namespace macie
