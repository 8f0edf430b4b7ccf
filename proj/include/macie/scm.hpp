#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "macie/core.hpp"
#include "macie/regression.hpp"

namespace macie {

// Two-slice unrolled variables: state features S(t), actions A(t), next-state
// features S(t+1), the step reward R(t), next actions A(t+1), and the episode outcome Y.
enum class NodeKind { state, action, next_state, reward, next_action, outcome };

struct Node {
  NodeKind kind = NodeKind::state;
  std::size_t index = 0;  // feature index for state kinds, agent index for action kinds

  friend bool operator==(const Node&, const Node&) = default;
};

using NodeId = std::size_t;

struct Edge {
  NodeId from = 0;
  NodeId to = 0;
  bool candidate = false;  // inter-agent edge subject to pruning

  friend bool operator==(const Edge&, const Edge&) = default;
};

class CausalGraph {
 public:
  CausalGraph() = default;
  CausalGraph(std::size_t num_agents, std::size_t state_dim);

  std::size_t num_agents() const { return num_agents_; }
  std::size_t state_dim() const { return state_dim_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }

  NodeId id(NodeKind kind, std::size_t index = 0) const;
  std::string name(NodeId node) const;
  bool is_action(NodeId node) const;
  bool is_exogenous(NodeId node) const { return nodes_.at(node).kind == NodeKind::state; }

  void add_edge(NodeId from, NodeId to, bool candidate = false);
  void remove_edge(NodeId from, NodeId to);
  bool has_edge(NodeId from, NodeId to) const;
  std::vector<NodeId> parents(NodeId node) const;  // ascending ids

  std::optional<std::vector<NodeId>> topological_order() const;
  bool is_acyclic() const { return topological_order().has_value(); }

  friend bool operator==(const CausalGraph&, const CausalGraph&) = default;

 private:
  std::size_t num_agents_ = 0;
  std::size_t state_dim_ = 0;
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;  // sorted by (to, from)
};

struct InterAgentEdge {
  std::size_t source_agent = 0;
  std::size_t target_agent = 0;
  friend bool operator==(const InterAgentEdge&, const InterAgentEdge&) = default;
};

CausalGraph build_graph_template(std::size_t num_agents, std::size_t state_dim);
// Drops candidate edges A_i(t) -> A_j(t+1) whose |Pearson corr(a_i(t), a_j(t+1))|
// falls below the threshold. Template edges are never removed.
CausalGraph prune_edges(const CausalGraph& graph, const History& history,
                        double corr_threshold = 0.1);
std::vector<InterAgentEdge> inter_agent_edges(const CausalGraph& graph);
// Sample correlation between a_i(t) and a_j(t+1) pooled over episodes; 0 when either
// side has zero variance.
double lagged_action_correlation(const History& history, std::size_t source,
                                 std::size_t target);

struct StructuralEquation {
  NodeId target = 0;
  std::vector<NodeId> parents;
  ModelKind model = ModelKind::constant_mean;
  // Number of action categories for discrete targets; 0 for real-valued targets.
  std::size_t categories = 0;
  // One regressor for a real target, one indicator regressor per category otherwise.
  std::vector<Regressor> outputs;

  friend bool operator==(const StructuralEquation&, const StructuralEquation&) = default;
};

struct FitOptions {
  ModelKind model = ModelKind::tree_ensemble;
  TreeParams trees;
  std::uint64_t seed = 0;
  OutcomeSpec outcome;
  std::size_t threads = 1;
  std::size_t min_samples = 10;
  // Action space size for action nodes; 0 uses the largest observed action + 1.
  std::size_t num_actions = 0;
};

class SCModel {
 public:
  SCModel() = default;

  const CausalGraph& graph() const { return graph_; }
  std::size_t num_actions() const { return num_actions_; }
  const FitOptions& options() const { return options_; }
  const std::vector<StructuralEquation>& equations() const { return equations_; }
  const StructuralEquation& equation(NodeId node) const;

  // Node values in graph id order; action nodes hold the action index.
  using Assignment = std::vector<double>;
  double predict(NodeId node, const Assignment& values) const;

  std::vector<double> validation_r2;  // per node id; exogenous entries are 0
  double mean_validation_r2() const;

  void write(std::ostream& out) const;
  static SCModel read(std::istream& in);
  void save(const std::string& path) const;
  static SCModel load(const std::string& path);

  // Compares everything that is serialized; runtime-only options are ignored.
  friend bool operator==(const SCModel& a, const SCModel& b);
  friend SCModel fit_equations(const CausalGraph&, const History&, const FitOptions&);

 private:
  CausalGraph graph_;
  std::size_t num_actions_ = 0;
  FitOptions options_;
  std::vector<StructuralEquation> equations_;  // topological order
  std::vector<std::size_t> slot_;              // node id -> equation index or npos
};

// Number of actions observed in the history (max action index + 1).
std::size_t observed_action_count(const History& history);

SCModel fit_equations(const CausalGraph& graph, const History& history, const FitOptions& options);

struct Validation {
  std::vector<double> r2;  // per node id, exogenous entries 0
  double mean_r2 = 0.0;    // over endogenous nodes
};

// k-fold cross-validated R^2 per endogenous node; action nodes pool their indicator
// regressions into one score.
Validation validate(const SCModel& scm, const History& history, std::size_t k_folds);

// Convenience: template, prune, fit, and store k-fold validation scores.
SCModel learn_scm(const History& history, const FitOptions& options, double corr_threshold = 0.1,
                  std::size_t k_folds = 5);

}  // namespace macie
