#include "macie/envs.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "macie/format.hpp"

namespace macie {

void Environment::check_actions(const JointAction& joint_action) const {
  if (joint_action.size() != num_agents()) {
    throw Error(name() + ": joint action has " + std::to_string(joint_action.size()) +
                " entries, expected " + std::to_string(num_agents()));
  }
  for (ActionId a : joint_action) {
    if (a < 0 || static_cast<std::size_t>(a) >= num_actions()) {
      throw Error(name() + ": invalid action index " + std::to_string(a));
    }
  }
}

namespace {

const std::vector<std::string> kMoveNames = {"up", "down", "left", "right", "stay"};

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(Cell, Cell) = default;
};

int manhattan(Cell a, Cell b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

Cell move_cell(Cell c, ActionId a, int width) {
  return {std::clamp(c.x + kMoveDx[a], 0, width - 1), std::clamp(c.y + kMoveDy[a], 0, width - 1)};
}

Cell cell_at(const StateVec& f, std::size_t offset) {
  return {static_cast<int>(f[offset]), static_cast<int>(f[offset + 1])};
}

void put_cell(StateVec& f, std::size_t offset, Cell c) {
  f[offset] = c.x;
  f[offset + 1] = c.y;
}

Cell random_cell(RngStream& rng, int width) {
  const int x = static_cast<int>(rng.uniform_index(width));
  const int y = static_cast<int>(rng.uniform_index(width));
  return {x, y};
}

// Lowest-index move minimising the Manhattan distance to `target`.
ActionId approach(Cell from, Cell target, int width) {
  ActionId best = 0;
  int best_d = std::numeric_limits<int>::max();
  for (ActionId a = 0; a < 5; ++a) {
    const int d = manhattan(move_cell(from, a, width), target);
    if (d < best_d) {
      best_d = d;
      best = a;
    }
  }
  return best;
}

// Two agents navigate to private goals; a shared bonus is paid once when both stand
// on their goals at the same step, which ends the episode.
//
// Layout: a0x a0y a1x a1y g0x g0y g1x g1y reached0 reached1.
// Agent 1's start and goal are the point reflections of agent 0's through the grid
// centre, so both agents face the same path length.
class GridWorld final : public Environment {
 public:
  explicit GridWorld(const EnvConfig& c)
      : width_(c.grid_size > 0 ? c.grid_size : 5), horizon_(c.horizon), bonus_(c.collective_bonus) {
    if (width_ < 2) throw ConfigError("gridworld: grid_size must be at least 2");
  }

  std::string name() const override { return "gridworld"; }
  std::size_t num_agents() const override { return 2; }
  std::size_t num_actions() const override { return 5; }
  std::vector<std::string> action_names() const override { return kMoveNames; }
  std::vector<std::string> feature_layout() const override {
    return {"a0x", "a0y", "a1x", "a1y", "g0x", "g0y", "g1x", "g1y", "reached0", "reached1"};
  }
  int horizon() const override { return horizon_; }

  EnvState reset(std::uint64_t seed) const override {
    RngStream rng = derive_stream(SeedTree{seed}, "reset");
    const auto mirror = [&](Cell c) { return Cell{width_ - 1 - c.x, width_ - 1 - c.y}; };
    for (;;) {
      const Cell a0 = random_cell(rng, width_);
      const Cell g0 = random_cell(rng, width_);
      const std::array<Cell, 4> cells = {a0, mirror(a0), g0, mirror(g0)};
      bool distinct = true;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        for (std::size_t j = i + 1; j < cells.size(); ++j) distinct &= !(cells[i] == cells[j]);
      }
      if (!distinct) continue;
      EnvState s;
      s.features.assign(10, 0.0);
      put_cell(s.features, 0, cells[0]);
      put_cell(s.features, 2, cells[1]);
      put_cell(s.features, 4, cells[2]);
      put_cell(s.features, 6, cells[3]);
      return s;
    }
  }

  StepResult step(const EnvState& state, const JointAction& ja, RngStream&) const override {
    check_actions(ja);
    StepResult r;
    r.next = state;
    r.rewards.assign(2, -0.01);
    StateVec& f = r.next.features;
    bool both = true;
    for (std::size_t i = 0; i < 2; ++i) {
      const Cell pos = move_cell(cell_at(f, 2 * i), ja[i], width_);
      put_cell(f, 2 * i, pos);
      const bool on_goal = pos == cell_at(f, 4 + 2 * i);
      if (on_goal && f[8 + i] == 0.0) {
        f[8 + i] = 1.0;
        r.rewards[i] += 1.0;
      }
      both &= on_goal;
    }
    r.team_reward = r.rewards[0] + r.rewards[1];
    if (both) r.team_reward += bonus_;
    r.next.t = state.t + 1;
    r.terminal = both;
    r.done = both || r.next.t >= horizon_;
    r.next.done = r.done;
    return r;
  }

  ActionId greedy_action(const EnvState& state, std::size_t agent) const override {
    return approach(cell_at(state.features, 2 * agent), cell_at(state.features, 4 + 2 * agent),
                    width_);
  }

 private:
  int width_;
  int horizon_;
  double bonus_;
};

// Three agents on the unit square cover three landmarks. Kinematic moves of 0.1;
// reward per step is minus the summed landmark-to-nearest-agent distance, minus one
// per colliding agent pair.
//
// Layout: a0x a0y a1x a1y a2x a2y l0x l0y l1x l1y l2x l2y.
class CoopNav final : public Environment {
 public:
  static constexpr std::size_t kAgents = 3;
  static constexpr double kStep = 0.1;
  static constexpr double kCollision = 0.1;

  explicit CoopNav(const EnvConfig& c) : horizon_(c.horizon) {}

  std::string name() const override { return "coopnav"; }
  std::size_t num_agents() const override { return kAgents; }
  std::size_t num_actions() const override { return 5; }
  std::vector<std::string> action_names() const override { return kMoveNames; }
  std::vector<std::string> feature_layout() const override {
    return {"a0x", "a0y", "a1x", "a1y", "a2x", "a2y", "l0x", "l0y", "l1x", "l1y", "l2x", "l2y"};
  }
  int horizon() const override { return horizon_; }

  EnvState reset(std::uint64_t seed) const override {
    RngStream rng = derive_stream(SeedTree{seed}, "reset");
    EnvState s;
    s.features.assign(12, 0.0);
    for (std::size_t p = 0; p < 6; ++p) {
      for (;;) {
        const double x = rng.uniform();
        const double y = rng.uniform();
        bool clear = true;
        for (std::size_t q = 0; q < p; ++q) {
          clear &= std::hypot(x - s.features[2 * q], y - s.features[2 * q + 1]) >= kCollision;
        }
        if (!clear) continue;
        s.features[2 * p] = x;
        s.features[2 * p + 1] = y;
        break;
      }
    }
    return s;
  }

  StepResult step(const EnvState& state, const JointAction& ja, RngStream&) const override {
    check_actions(ja);
    StepResult r;
    r.next = state;
    StateVec& f = r.next.features;
    for (std::size_t i = 0; i < kAgents; ++i) {
      f[2 * i] = std::clamp(f[2 * i] + kStep * kMoveDx[ja[i]], 0.0, 1.0);
      f[2 * i + 1] = std::clamp(f[2 * i + 1] + kStep * kMoveDy[ja[i]], 0.0, 1.0);
    }
    double coverage = 0.0;
    for (std::size_t l = 0; l < 3; ++l) {
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < kAgents; ++i) nearest = std::min(nearest, dist(f, i, 3 + l));
      coverage += nearest;
    }
    r.rewards.assign(kAgents, -coverage / kAgents);
    for (std::size_t i = 0; i < kAgents; ++i) {
      for (std::size_t j = i + 1; j < kAgents; ++j) {
        if (dist(f, i, j) < kCollision) {
          r.rewards[i] -= 0.5;
          r.rewards[j] -= 0.5;
        }
      }
    }
    r.team_reward = team_reward_sum(r.rewards);
    r.next.t = state.t + 1;
    r.done = r.next.t >= horizon_;
    r.next.done = r.done;
    return r;
  }

  // Heads for the nearest landmark that no other agent already covers.
  ActionId greedy_action(const EnvState& state, std::size_t agent) const override {
    const StateVec& f = state.features;
    std::size_t target = 3;
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (int pass = 0; pass < 2 && !found; ++pass) {
      for (std::size_t l = 3; l < 6; ++l) {
        bool covered = false;
        for (std::size_t j = 0; j < kAgents && pass == 0; ++j) {
          covered |= j != agent && dist(f, j, l) < kCollision;
        }
        if (covered) continue;
        const double d = dist(f, agent, l);
        if (d < best) {
          best = d;
          target = l;
          found = true;
        }
      }
    }
    ActionId action = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (ActionId a = 0; a < 5; ++a) {
      const double x = std::clamp(f[2 * agent] + kStep * kMoveDx[a], 0.0, 1.0);
      const double y = std::clamp(f[2 * agent + 1] + kStep * kMoveDy[a], 0.0, 1.0);
      const double d = std::hypot(x - f[2 * target], y - f[2 * target + 1]);
      if (d < best_d) {
        best_d = d;
        action = a;
      }
    }
    return action;
  }

 private:
  static double dist(const StateVec& f, std::size_t p, std::size_t q) {
    return std::hypot(f[2 * p] - f[2 * q], f[2 * p + 1] - f[2 * q + 1]);
  }

  int horizon_;
};

// Two predators chase one prey on a grid. Predators move first; landing on the prey's
// cell is a capture (done). Otherwise the prey takes the move that maximises its
// Manhattan distance to the nearest predator, lowest action index on ties.
//
// Layout: p0x p0y p1x p1y preyx preyy.
class PredatorPrey final : public Environment {
 public:
  explicit PredatorPrey(const EnvConfig& c)
      : width_(c.grid_size > 0 ? c.grid_size : 7),
        horizon_(c.horizon),
        capture_reward_(c.capture_reward),
        step_penalty_(c.step_penalty) {
    if (width_ < 3) throw ConfigError("predatorprey: grid_size must be at least 3");
  }

  std::string name() const override { return "predatorprey"; }
  std::size_t num_agents() const override { return 2; }
  std::size_t num_actions() const override { return 5; }
  std::vector<std::string> action_names() const override { return kMoveNames; }
  std::vector<std::string> feature_layout() const override {
    return {"p0x", "p0y", "p1x", "p1y", "preyx", "preyy"};
  }
  int horizon() const override { return horizon_; }

  EnvState reset(std::uint64_t seed) const override {
    RngStream rng = derive_stream(SeedTree{seed}, "reset");
    for (;;) {
      const Cell p0 = random_cell(rng, width_);
      const Cell p1 = random_cell(rng, width_);
      const Cell prey = random_cell(rng, width_);
      if (p0 == p1 || manhattan(p0, prey) < 2 || manhattan(p1, prey) < 2) continue;
      EnvState s;
      s.features.assign(6, 0.0);
      put_cell(s.features, 0, p0);
      put_cell(s.features, 2, p1);
      put_cell(s.features, 4, prey);
      return s;
    }
  }

  StepResult step(const EnvState& state, const JointAction& ja, RngStream&) const override {
    check_actions(ja);
    StepResult r;
    r.next = state;
    StateVec& f = r.next.features;
    const Cell prey = cell_at(f, 4);
    bool captured = false;
    for (std::size_t i = 0; i < 2; ++i) {
      const Cell p = move_cell(cell_at(f, 2 * i), ja[i], width_);
      put_cell(f, 2 * i, p);
      captured |= p == prey;
    }
    r.rewards.assign(2, -step_penalty_);
    if (captured) {
      for (double& v : r.rewards) v += capture_reward_;
    } else {
      put_cell(f, 4, evade(prey, cell_at(f, 0), cell_at(f, 2)));
    }
    r.team_reward = team_reward_sum(r.rewards);
    r.next.t = state.t + 1;
    r.terminal = captured;
    r.done = captured || r.next.t >= horizon_;
    r.next.done = r.done;
    return r;
  }

  ActionId greedy_action(const EnvState& state, std::size_t agent) const override {
    return approach(cell_at(state.features, 2 * agent), cell_at(state.features, 4), width_);
  }

  Cell evade(Cell prey, Cell p0, Cell p1) const {
    Cell best = prey;
    int best_d = -1;
    for (ActionId a = 0; a < 5; ++a) {
      const Cell c = move_cell(prey, a, width_);
      const int d = std::min(manhattan(c, p0), manhattan(c, p1));
      if (d > best_d) {
        best_d = d;
        best = c;
      }
    }
    return best;
  }

 private:
  int width_;
  int horizon_;
  double capture_reward_;
  double step_penalty_;
};

// Three signalised intersections along an east-west corridor. Each has a NS and an
// EW queue; the green direction discharges up to two vehicles per step. EW vehicles
// leaving intersection i join intersection i+1's EW queue. Reward is minus the total
// queue length over ten, measured after discharge and before new arrivals.
//
// Layout: q0ns q0ew q1ns q1ew q2ns q2ew.
class Traffic final : public Environment {
 public:
  static constexpr std::size_t kIntersections = 3;
  static constexpr double kDischarge = 2.0;

  explicit Traffic(const EnvConfig& c) : horizon_(c.horizon), arrival_prob_(c.arrival_prob) {
    if (arrival_prob_ < 0.0 || arrival_prob_ > 1.0) {
      throw ConfigError("traffic: arrival_prob must lie in [0, 1]");
    }
  }

  std::string name() const override { return "traffic"; }
  std::size_t num_agents() const override { return kIntersections; }
  std::size_t num_actions() const override { return 2; }
  std::vector<std::string> action_names() const override { return {"ns_green", "ew_green"}; }
  std::vector<std::string> feature_layout() const override {
    return {"q0ns", "q0ew", "q1ns", "q1ew", "q2ns", "q2ew"};
  }
  int horizon() const override { return horizon_; }

  EnvState reset(std::uint64_t seed) const override {
    RngStream rng = derive_stream(SeedTree{seed}, "reset");
    EnvState s;
    s.features.assign(2 * kIntersections, 0.0);
    for (double& q : s.features) q = static_cast<double>(rng.uniform_index(4));
    return s;
  }

  StepResult step(const EnvState& state, const JointAction& ja, RngStream& env_rng) const override {
    check_actions(ja);
    StepResult r;
    r.next = state;
    StateVec& f = r.next.features;
    std::array<double, kIntersections> through{};
    for (std::size_t i = 0; i < kIntersections; ++i) {
      double& q = f[2 * i + static_cast<std::size_t>(ja[i])];
      const double leaving = std::min(q, kDischarge);
      q -= leaving;
      if (ja[i] == 1 && i + 1 < kIntersections) through[i + 1] = leaving;
    }
    r.rewards.resize(kIntersections);
    for (std::size_t i = 0; i < kIntersections; ++i) {
      r.rewards[i] = -(f[2 * i] + f[2 * i + 1]) / 10.0;
    }
    r.team_reward = team_reward_sum(r.rewards);
    for (std::size_t i = 0; i < kIntersections; ++i) {
      f[2 * i] += env_rng.bernoulli(arrival_prob_) ? 1.0 : 0.0;
      f[2 * i + 1] += (env_rng.bernoulli(arrival_prob_) ? 1.0 : 0.0) + through[i];
    }
    r.next.t = state.t + 1;
    r.done = r.next.t >= horizon_;
    r.next.done = r.done;
    return r;
  }

  ActionId greedy_action(const EnvState& state, std::size_t agent) const override {
    return state.features[2 * agent + 1] > state.features[2 * agent] ? 1 : 0;
  }

 private:
  int horizon_;
  double arrival_prob_;
};

}  // namespace

std::vector<std::string> env_names() { return {"gridworld", "coopnav", "predatorprey", "traffic"}; }

std::unique_ptr<Environment> make_env(const EnvConfig& config) {
  if (config.horizon < 1) throw ConfigError("horizon must be positive");
  if (config.name == "gridworld") return std::make_unique<GridWorld>(config);
  if (config.name == "coopnav") return std::make_unique<CoopNav>(config);
  if (config.name == "predatorprey") return std::make_unique<PredatorPrey>(config);
  if (config.name == "traffic") return std::make_unique<Traffic>(config);
  throw ConfigError("unknown environment '" + config.name + "' (valid: " + join(env_names(), ", ") +
                    ")");
}

std::size_t default_episode_count(const std::string& env_name) {
  if (env_name == "gridworld" || env_name == "traffic") return 25;
  if (env_name == "coopnav" || env_name == "predatorprey") return 20;
  throw ConfigError("unknown environment '" + env_name + "'");
}

}  // namespace macie
