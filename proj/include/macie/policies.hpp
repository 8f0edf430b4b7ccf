#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "macie/envs.hpp"
#include "macie/rng.hpp"

namespace macie {

// The random numbers one agent consumes at one timestep. Every policy reads from the
// same pair, so swapping an agent's policy leaves every other stream aligned.
struct ActionNoise {
  double branch = 0.0;       // uniform [0, 1): skill coin
  std::uint64_t pick = 0;    // raw draw mapped to a uniform action
};

ActionNoise draw_noise(RngStream& rng);

class Policy {
 public:
  virtual ~Policy() = default;
  virtual ActionId act(const Environment& env, const EnvState& state, std::size_t agent,
                       const ActionNoise& noise) const = 0;
  virtual std::string describe() const = 0;
};

using PolicyPtr = std::shared_ptr<const Policy>;

// Greedy with probability alpha, uniform otherwise.
class SkillPolicy final : public Policy {
 public:
  explicit SkillPolicy(double alpha);
  ActionId act(const Environment& env, const EnvState& state, std::size_t agent,
               const ActionNoise& noise) const override;
  std::string describe() const override;
  double alpha() const { return alpha_; }

 private:
  double alpha_;
};

// Uniform over the action space: the "learned nothing" reference behaviour.
class BaselinePolicy final : public Policy {
 public:
  explicit BaselinePolicy(std::size_t action_space_size);
  ActionId act(const Environment& env, const EnvState& state, std::size_t agent,
               const ActionNoise& noise) const override;
  std::string describe() const override;

 private:
  std::size_t size_;
};

ActionId greedy_action(const Environment& env, const EnvState& state, std::size_t agent,
                       double alpha, RngStream& rng);
ActionId baseline_action(std::size_t action_space_size, RngStream& rng);

// alpha_i = 0.70 + 0.10 * i / (N - 1).
std::vector<double> default_skills(std::size_t num_agents);
std::vector<PolicyPtr> make_skill_policies(const std::vector<double>& alphas);

}  // namespace macie
