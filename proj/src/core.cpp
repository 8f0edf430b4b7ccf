#include "macie/core.hpp"

#include <numeric>

namespace macie {

History History::resample(std::span<const std::size_t> indices) const {
  History out;
  out.env_name = env_name;
  out.num_agents = num_agents;
  out.horizon = horizon;
  out.feature_layout = feature_layout;
  out.episodes.reserve(indices.size());
  for (std::size_t i : indices) out.episodes.push_back(episodes.at(i));
  return out;
}

void check_history(const History& history) {
  for (const Episode& ep : history.episodes) {
    if (ep.env_name != history.env_name) {
      throw Error("episode env '" + ep.env_name + "' does not match history env '" +
                  history.env_name + "'");
    }
    if (ep.steps.empty()) throw Error("episode with no steps");
    if (static_cast<int>(ep.steps.size()) > ep.horizon) {
      throw Error("episode longer than its horizon");
    }
    for (const Step& s : ep.steps) {
      if (s.joint_action.size() != history.num_agents ||
          s.rewards.size() != history.num_agents) {
        throw Error("step agent count does not match history");
      }
      if (s.state.size() != history.state_dim()) {
        throw Error("step state length does not match feature layout");
      }
    }
  }
}

std::string to_string(OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::cumulative_team_reward:
      return "cumulative_team_reward";
    case OutcomeKind::terminal_success_indicator:
      return "terminal_success_indicator";
  }
  return "?";
}

OutcomeKind outcome_kind_from_string(const std::string& text) {
  if (text == "cumulative_team_reward") return OutcomeKind::cumulative_team_reward;
  if (text == "terminal_success_indicator") return OutcomeKind::terminal_success_indicator;
  throw ConfigError("unknown outcome kind '" + text + "'");
}

double team_reward_sum(std::span<const double> rewards) {
  return std::accumulate(rewards.begin(), rewards.end(), 0.0);
}

double outcome(const Episode& episode, const OutcomeSpec& spec) {
  if (episode.steps.empty()) throw Error("no episodes");
  if (spec.kind == OutcomeKind::terminal_success_indicator) {
    return episode.terminated ? 1.0 : 0.0;
  }
  double total = 0.0;
  for (const Step& s : episode.steps) total += s.team_reward;
  return total;
}

double outcome(const History& history, const OutcomeSpec& spec) {
  if (history.episodes.empty()) throw Error("no episodes");
  double total = 0.0;
  for (const Episode& ep : history.episodes) total += outcome(ep, spec);
  return total / static_cast<double>(history.episodes.size());
}

std::vector<double> cumulative_trace(const Episode& episode, const OutcomeSpec& spec) {
  if (episode.steps.empty()) throw Error("no episodes");
  std::vector<double> trace(episode.steps.size(), 0.0);
  if (spec.kind == OutcomeKind::terminal_success_indicator) {
    // Success is only known once the episode has ended.
    if (episode.terminated) trace.back() = 1.0;
    return trace;
  }
  double running = 0.0;
  for (std::size_t t = 0; t < episode.steps.size(); ++t) {
    running += episode.steps[t].team_reward;
    trace[t] = running;
  }
  return trace;
}

std::vector<double> mean_trace(const History& history, std::size_t length,
                               const OutcomeSpec& spec) {
  if (history.episodes.empty()) throw Error("no episodes");
  std::vector<double> acc(length, 0.0);
  for (const Episode& ep : history.episodes) {
    const std::vector<double> trace = cumulative_trace(ep, spec);
    for (std::size_t t = 0; t < length; ++t) {
      acc[t] += t < trace.size() ? trace[t] : trace.back();
    }
  }
  for (double& v : acc) v /= static_cast<double>(history.episodes.size());
  return acc;
}

}  // namespace macie
