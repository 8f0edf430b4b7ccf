#include "macie/policies.hpp"

#include "macie/format.hpp"

namespace macie {

ActionNoise draw_noise(RngStream& rng) {
  ActionNoise n;
  n.branch = rng.uniform();
  n.pick = rng.next_u64();
  return n;
}

SkillPolicy::SkillPolicy(double alpha) : alpha_(alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("skill alpha must lie in [0, 1]");
}

ActionId SkillPolicy::act(const Environment& env, const EnvState& state, std::size_t agent,
                          const ActionNoise& noise) const {
  if (noise.branch < alpha_) return env.greedy_action(state, agent);
  return static_cast<ActionId>(scale_to_index(noise.pick, env.num_actions()));
}

std::string SkillPolicy::describe() const { return "skill(alpha=" + shortest(alpha_) + ")"; }

BaselinePolicy::BaselinePolicy(std::size_t action_space_size) : size_(action_space_size) {
  if (size_ == 0) throw ConfigError("baseline policy needs a non-empty action space");
}

ActionId BaselinePolicy::act(const Environment&, const EnvState&, std::size_t,
                             const ActionNoise& noise) const {
  return static_cast<ActionId>(scale_to_index(noise.pick, size_));
}

std::string BaselinePolicy::describe() const { return "uniform(" + std::to_string(size_) + ")"; }

ActionId greedy_action(const Environment& env, const EnvState& state, std::size_t agent,
                       double alpha, RngStream& rng) {
  return SkillPolicy(alpha).act(env, state, agent, draw_noise(rng));
}

ActionId baseline_action(std::size_t action_space_size, RngStream& rng) {
  if (action_space_size == 0) throw ConfigError("baseline action space size must be positive");
  return static_cast<ActionId>(scale_to_index(draw_noise(rng).pick, action_space_size));
}

std::vector<double> default_skills(std::size_t num_agents) {
  std::vector<double> alphas(num_agents, 0.70);
  if (num_agents < 2) return alphas;
  for (std::size_t i = 0; i < num_agents; ++i) {
    alphas[i] = 0.70 + 0.10 * static_cast<double>(i) / static_cast<double>(num_agents - 1);
  }
  return alphas;
}

std::vector<PolicyPtr> make_skill_policies(const std::vector<double>& alphas) {
  std::vector<PolicyPtr> out;
  out.reserve(alphas.size());
  for (double a : alphas) out.push_back(std::make_shared<SkillPolicy>(a));
  return out;
}

}  // namespace macie
