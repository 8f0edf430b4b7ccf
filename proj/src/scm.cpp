#include "macie/scm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "macie/format.hpp"
#include "macie/parallel.hpp"

namespace macie {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

}  // namespace

CausalGraph::CausalGraph(std::size_t num_agents, std::size_t state_dim)
    : num_agents_(num_agents), state_dim_(state_dim) {
  for (std::size_t f = 0; f < state_dim; ++f) nodes_.push_back({NodeKind::state, f});
  for (std::size_t i = 0; i < num_agents; ++i) nodes_.push_back({NodeKind::action, i});
  for (std::size_t f = 0; f < state_dim; ++f) nodes_.push_back({NodeKind::next_state, f});
  nodes_.push_back({NodeKind::reward, 0});
  for (std::size_t i = 0; i < num_agents; ++i) nodes_.push_back({NodeKind::next_action, i});
  nodes_.push_back({NodeKind::outcome, 0});
}

NodeId CausalGraph::id(NodeKind kind, std::size_t index) const {
  const std::size_t d = state_dim_;
  const std::size_t n = num_agents_;
  const bool per_feature = kind == NodeKind::state || kind == NodeKind::next_state;
  const bool per_agent = kind == NodeKind::action || kind == NodeKind::next_action;
  if ((per_feature && index >= d) || (per_agent && index >= n) ||
      (!per_feature && !per_agent && index != 0)) {
    throw Error("node index out of range");
  }
  switch (kind) {
    case NodeKind::state: return index;
    case NodeKind::action: return d + index;
    case NodeKind::next_state: return d + n + index;
    case NodeKind::reward: return 2 * d + n;
    case NodeKind::next_action: return 2 * d + n + 1 + index;
    case NodeKind::outcome: return 2 * d + 2 * n + 1;
  }
  return 0;
}

std::string CausalGraph::name(NodeId node) const {
  const Node& n = nodes_.at(node);
  const std::string i = std::to_string(n.index);
  switch (n.kind) {
    case NodeKind::state: return "S(t)[" + i + "]";
    case NodeKind::action: return "A" + i + "(t)";
    case NodeKind::next_state: return "S(t+1)[" + i + "]";
    case NodeKind::reward: return "R(t)";
    case NodeKind::next_action: return "A" + i + "(t+1)";
    case NodeKind::outcome: return "Y";
  }
  return "?";
}

bool CausalGraph::is_action(NodeId node) const {
  const NodeKind k = nodes_.at(node).kind;
  return k == NodeKind::action || k == NodeKind::next_action;
}

void CausalGraph::add_edge(NodeId from, NodeId to, bool candidate) {
  if (from >= nodes_.size() || to >= nodes_.size()) throw Error("edge endpoint out of range");
  if (from == to) throw Error("self loops are not allowed");
  if (has_edge(from, to)) return;
  const Edge e{from, to, candidate};
  const auto pos = std::lower_bound(edges_.begin(), edges_.end(), e, [](const Edge& a, const Edge& b) {
    return a.to != b.to ? a.to < b.to : a.from < b.from;
  });
  edges_.insert(pos, e);
}

void CausalGraph::remove_edge(NodeId from, NodeId to) {
  std::erase_if(edges_, [&](const Edge& e) { return e.from == from && e.to == to; });
}

bool CausalGraph::has_edge(NodeId from, NodeId to) const {
  return std::any_of(edges_.begin(), edges_.end(),
                     [&](const Edge& e) { return e.from == from && e.to == to; });
}

std::vector<NodeId> CausalGraph::parents(NodeId node) const {
  std::vector<NodeId> out;
  for (const Edge& e : edges_) {
    if (e.to == node) out.push_back(e.from);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<std::vector<NodeId>> CausalGraph::topological_order() const {
  std::vector<std::size_t> indeg(nodes_.size(), 0);
  std::vector<std::vector<NodeId>> out(nodes_.size());
  for (const Edge& e : edges_) {
    ++indeg[e.to];
    out[e.from].push_back(e.to);
  }
  std::vector<NodeId> order;
  std::vector<NodeId> ready;
  for (NodeId v = 0; v < nodes_.size(); ++v) {
    if (indeg[v] == 0) ready.push_back(v);
  }
  // Smallest ready id first keeps the order canonical.
  while (!ready.empty()) {
    const auto it = std::min_element(ready.begin(), ready.end());
    const NodeId v = *it;
    ready.erase(it);
    order.push_back(v);
    for (NodeId w : out[v]) {
      if (--indeg[w] == 0) ready.push_back(w);
    }
  }
  if (order.size() != nodes_.size()) return std::nullopt;
  return order;
}

CausalGraph build_graph_template(std::size_t num_agents, std::size_t state_dim) {
  if (num_agents < 2) throw ConfigError("causal graph needs at least 2 agents");
  if (state_dim < 1) throw ConfigError("causal graph needs at least one state feature");
  CausalGraph g(num_agents, state_dim);
  const NodeId r = g.id(NodeKind::reward);
  for (std::size_t i = 0; i < num_agents; ++i) {
    const NodeId a0 = g.id(NodeKind::action, i);
    const NodeId a1 = g.id(NodeKind::next_action, i);
    for (std::size_t f = 0; f < state_dim; ++f) {
      g.add_edge(g.id(NodeKind::state, f), a0);
      g.add_edge(g.id(NodeKind::next_state, f), a1);
      g.add_edge(a0, g.id(NodeKind::next_state, f));
    }
    g.add_edge(a0, r);
    for (std::size_t j = 0; j < num_agents; ++j) {
      if (j != i) g.add_edge(a0, g.id(NodeKind::next_action, j), true);
    }
  }
  for (std::size_t f = 0; f < state_dim; ++f) {
    for (std::size_t h = 0; h < state_dim; ++h) {
      g.add_edge(g.id(NodeKind::state, f), g.id(NodeKind::next_state, h));
    }
    g.add_edge(g.id(NodeKind::next_state, f), r);
  }
  g.add_edge(r, g.id(NodeKind::outcome));
  return g;
}

double lagged_action_correlation(const History& history, std::size_t source, std::size_t target) {
  double n = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (const Episode& ep : history.episodes) {
    for (std::size_t t = 0; t + 1 < ep.steps.size(); ++t) {
      const double x = ep.steps[t].joint_action.at(source);
      const double y = ep.steps[t + 1].joint_action.at(target);
      n += 1;
      sx += x;
      sy += y;
      sxx += x * x;
      syy += y * y;
      sxy += x * y;
    }
  }
  if (n < 2) return 0.0;
  const double cov = sxy - sx * sy / n;
  const double vx = sxx - sx * sx / n;
  const double vy = syy - sy * sy / n;
  if (vx <= 1e-12 || vy <= 1e-12) return 0.0;
  return cov / std::sqrt(vx * vy);
}

CausalGraph prune_edges(const CausalGraph& graph, const History& history, double corr_threshold) {
  if (history.empty()) throw Error("prune_edges: no episodes");
  CausalGraph out = graph;
  for (const Edge& e : graph.edges()) {
    if (!e.candidate) continue;
    const std::size_t i = graph.nodes()[e.from].index;
    const std::size_t j = graph.nodes()[e.to].index;
    if (std::abs(lagged_action_correlation(history, i, j)) < corr_threshold) {
      out.remove_edge(e.from, e.to);
    }
  }
  return out;
}

std::vector<InterAgentEdge> inter_agent_edges(const CausalGraph& graph) {
  std::vector<InterAgentEdge> out;
  for (const Edge& e : graph.edges()) {
    if (!graph.is_action(e.from) || !graph.is_action(e.to)) continue;
    const std::size_t i = graph.nodes()[e.from].index;
    const std::size_t j = graph.nodes()[e.to].index;
    if (i != j) out.push_back({i, j});
  }
  std::sort(out.begin(), out.end(), [](const InterAgentEdge& a, const InterAgentEdge& b) {
    return a.source_agent != b.source_agent ? a.source_agent < b.source_agent
                                            : a.target_agent < b.target_agent;
  });
  return out;
}

std::size_t observed_action_count(const History& history) {
  ActionId top = 0;
  for (const Episode& ep : history.episodes) {
    for (const Step& s : ep.steps) {
      for (ActionId a : s.joint_action) top = std::max(top, a);
    }
  }
  return static_cast<std::size_t>(top) + 1;
}

namespace {

// Flattened samples: one assignment per (episode, t) over the step nodes and one per
// episode for the outcome equation (R holds the episode's reward sum there).
struct Samples {
  std::vector<SCModel::Assignment> steps;
  std::vector<SCModel::Assignment> episodes;
};

Samples flatten(const CausalGraph& g, const History& history, const OutcomeSpec& spec) {
  Samples s;
  const std::size_t d = g.state_dim();
  const std::size_t n = g.num_agents();
  if (history.num_agents != n || history.state_dim() != d) {
    throw Error("history does not match the causal graph dimensions");
  }
  for (const Episode& ep : history.episodes) {
    for (std::size_t t = 0; t < ep.steps.size(); ++t) {
      SCModel::Assignment v(g.nodes().size(), kMissing);
      const Step& st = ep.steps[t];
      for (std::size_t f = 0; f < d; ++f) v[g.id(NodeKind::state, f)] = st.state[f];
      for (std::size_t i = 0; i < n; ++i) v[g.id(NodeKind::action, i)] = st.joint_action[i];
      const StateVec* next = nullptr;
      if (t + 1 < ep.steps.size()) next = &ep.steps[t + 1].state;
      else if (!ep.final_state.empty()) next = &ep.final_state;
      if (next != nullptr) {
        for (std::size_t f = 0; f < d; ++f) v[g.id(NodeKind::next_state, f)] = (*next)[f];
      }
      v[g.id(NodeKind::reward)] = st.team_reward;
      if (t + 1 < ep.steps.size()) {
        for (std::size_t i = 0; i < n; ++i) {
          v[g.id(NodeKind::next_action, i)] = ep.steps[t + 1].joint_action[i];
        }
      }
      s.steps.push_back(std::move(v));
    }
    SCModel::Assignment e(g.nodes().size(), kMissing);
    double total = 0.0;
    for (const Step& st : ep.steps) total += st.team_reward;
    e[g.id(NodeKind::reward)] = total;
    e[g.id(NodeKind::outcome)] = outcome(ep, spec);
    s.episodes.push_back(std::move(e));
  }
  return s;
}

std::size_t encoded_width(const CausalGraph& g, const std::vector<NodeId>& parents,
                          std::size_t num_actions) {
  std::size_t w = 0;
  for (NodeId p : parents) w += g.is_action(p) ? num_actions : 1;
  return w;
}

void encode(const CausalGraph& g, const std::vector<NodeId>& parents, std::size_t num_actions,
            const SCModel::Assignment& v, std::vector<double>& out) {
  out.clear();
  for (NodeId p : parents) {
    if (g.is_action(p)) {
      const auto a = static_cast<std::size_t>(v[p]);
      for (std::size_t c = 0; c < num_actions; ++c) out.push_back(c == a ? 1.0 : 0.0);
    } else {
      out.push_back(v[p]);
    }
  }
}

// Design matrix for one equation; `targets` gets one column per output.
struct EquationData {
  Dataset design;                          // y unused
  std::vector<std::vector<double>> targets;
};

EquationData gather(const CausalGraph& g, NodeId target, const std::vector<NodeId>& parents,
                    std::size_t categories, std::size_t num_actions, const Samples& samples) {
  const auto& rows = g.nodes()[target].kind == NodeKind::outcome ? samples.episodes : samples.steps;
  EquationData out;
  out.design.cols = encoded_width(g, parents, num_actions);
  const std::size_t outputs = categories == 0 ? 1 : categories;
  out.targets.assign(outputs, {});
  std::vector<double> x;
  for (const auto& v : rows) {
    if (std::isnan(v[target])) continue;
    bool complete = true;
    for (NodeId p : parents) complete = complete && !std::isnan(v[p]);
    if (!complete) continue;
    encode(g, parents, num_actions, v, x);
    out.design.add_row(x, 0.0);
    if (categories == 0) {
      out.targets[0].push_back(v[target]);
    } else {
      const auto a = static_cast<std::size_t>(v[target]);
      for (std::size_t c = 0; c < categories; ++c) out.targets[c].push_back(c == a ? 1.0 : 0.0);
    }
  }
  return out;
}

std::vector<Regressor> fit_outputs(const EquationData& data, std::span<const std::size_t> rows,
                                   const FitOptions& opt, NodeId target, std::uint64_t fold) {
  std::vector<Regressor> outs;
  Dataset d = data.design.subset(rows);
  for (std::size_t c = 0; c < data.targets.size(); ++c) {
    for (std::size_t r = 0; r < rows.size(); ++r) d.y[r] = data.targets[c][rows[r]];
    const RngStream rng = derive_stream(SeedTree{opt.seed}, "tree", {target, c, fold});
    outs.push_back(Regressor::fit(opt.model, d, opt.trees, rng));
  }
  return outs;
}

double predict_outputs(const std::vector<Regressor>& outputs, std::size_t categories,
                       std::span<const double> x) {
  if (categories == 0) return outputs[0].predict(x);
  std::size_t best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < outputs.size(); ++c) {
    const double v = outputs[c].predict(x);
    if (v > best_v) {
      best_v = v;
      best = c;
    }
  }
  return static_cast<double>(best);
}

std::vector<NodeId> endogenous_order(const CausalGraph& g) {
  const auto order = g.topological_order();
  if (!order) throw Error("causal graph has a cycle");
  std::vector<NodeId> out;
  for (NodeId v : *order) {
    if (!g.is_exogenous(v)) out.push_back(v);
  }
  return out;
}

}  // namespace

const StructuralEquation& SCModel::equation(NodeId node) const {
  if (node >= slot_.size() || slot_[node] == kNone) {
    throw Error("node " + graph_.name(node) + " has no structural equation");
  }
  return equations_[slot_[node]];
}

double SCModel::predict(NodeId node, const Assignment& values) const {
  const StructuralEquation& eq = equation(node);
  std::vector<double> x;
  encode(graph_, eq.parents, num_actions_, values, x);
  return predict_outputs(eq.outputs, eq.categories, x);
}

bool operator==(const SCModel& a, const SCModel& b) {
  return a.graph_ == b.graph_ && a.num_actions_ == b.num_actions_ &&
         a.options_.model == b.options_.model && a.options_.seed == b.options_.seed &&
         a.options_.outcome.kind == b.options_.outcome.kind && a.options_.trees == b.options_.trees &&
         a.equations_ == b.equations_ && a.validation_r2 == b.validation_r2;
}

double SCModel::mean_validation_r2() const {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& eq : equations_) {
    if (eq.target < validation_r2.size()) {
      s += validation_r2[eq.target];
      ++n;
    }
  }
  return n == 0 ? 0.0 : s / static_cast<double>(n);
}

SCModel fit_equations(const CausalGraph& graph, const History& history, const FitOptions& options) {
  if (history.empty()) throw Error("fit_equations: no episodes");
  check_history(history);
  if (!graph.is_acyclic()) throw Error("causal graph has a cycle");
  SCModel m;
  m.graph_ = graph;
  m.options_ = options;
  m.num_actions_ = std::max(options.num_actions, observed_action_count(history));
  const Samples samples = flatten(graph, history, options.outcome);
  const auto order = endogenous_order(graph);
  m.equations_.resize(order.size());
  m.slot_.assign(graph.nodes().size(), kNone);
  for (std::size_t k = 0; k < order.size(); ++k) m.slot_[order[k]] = k;

  parallel_for(order.size(), options.threads, [&](std::size_t k) {
    StructuralEquation& eq = m.equations_[k];
    eq.target = order[k];
    eq.parents = graph.parents(eq.target);
    eq.model = options.model;
    eq.categories = graph.is_action(eq.target) ? m.num_actions_ : 0;
    const EquationData data = gather(graph, eq.target, eq.parents, eq.categories, m.num_actions_, samples);
    if (data.design.rows() < options.min_samples) {
      throw Error("insufficient data for node " + graph.name(eq.target) + ": " +
                  std::to_string(data.design.rows()) + " samples, need " +
                  std::to_string(options.min_samples));
    }
    std::vector<std::size_t> all(data.design.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    eq.outputs = fit_outputs(data, all, options, eq.target, 0);
  });
  return m;
}

Validation validate(const SCModel& scm, const History& history, std::size_t k_folds) {
  if (k_folds < 2) throw ConfigError("validation needs at least 2 folds");
  const CausalGraph& g = scm.graph();
  const FitOptions& opt = scm.options();
  const Samples samples = flatten(g, history, opt.outcome);
  Validation out;
  out.r2.assign(g.nodes().size(), 0.0);
  const auto& eqs = scm.equations();
  parallel_for(eqs.size(), opt.threads, [&](std::size_t k) {
    const StructuralEquation& eq = eqs[k];
    const EquationData data = gather(g, eq.target, eq.parents, eq.categories, scm.num_actions(), samples);
    const std::size_t n = data.design.rows();
    if (n < k_folds) throw Error("too few samples to validate node " + g.name(eq.target));
    // Deterministic fold assignment from a shuffled row order.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    RngStream rng = derive_stream(SeedTree{opt.seed}, "cv", {eq.target});
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
    std::vector<std::size_t> fold(n);
    for (std::size_t i = 0; i < n; ++i) fold[perm[i]] = i % k_folds;

    std::vector<std::vector<double>> pred(data.targets.size(), std::vector<double>(n, 0.0));
    for (std::size_t f = 0; f < k_folds; ++f) {
      std::vector<std::size_t> train;
      for (std::size_t i = 0; i < n; ++i) {
        if (fold[i] != f) train.push_back(i);
      }
      const auto outs = fit_outputs(data, train, opt, eq.target, f + 1);
      for (std::size_t i = 0; i < n; ++i) {
        if (fold[i] != f) continue;
        const auto x = data.design.row(i);
        for (std::size_t c = 0; c < outs.size(); ++c) pred[c][i] = outs[c].predict(x);
      }
    }
    double sse = 0.0;
    double sst = 0.0;
    for (std::size_t c = 0; c < data.targets.size(); ++c) {
      const auto& y = data.targets[c];
      const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        sse += (y[i] - pred[c][i]) * (y[i] - pred[c][i]);
        sst += (y[i] - mean) * (y[i] - mean);
      }
    }
    out.r2[eq.target] = r_squared_from_sums(sse, sst);
  });
  double s = 0.0;
  for (const auto& eq : eqs) s += out.r2[eq.target];
  out.mean_r2 = eqs.empty() ? 0.0 : s / static_cast<double>(eqs.size());
  return out;
}

SCModel learn_scm(const History& history, const FitOptions& options, double corr_threshold,
                  std::size_t k_folds) {
  const CausalGraph g = prune_edges(build_graph_template(history.num_agents, history.state_dim()),
                                    history, corr_threshold);
  SCModel m = fit_equations(g, history, options);
  m.validation_r2 = validate(m, history, k_folds).r2;
  return m;
}

// Flat text format:
//   #macie-scm v1
//   agents <N> features <d> actions <A> model <kind> seed <s> outcome <kind> trees <n> <depth> <leaf>
//   edges <E>           then E lines "<from> <to> <candidate>"
//   equations <Q>       then per equation "equation <target> <categories> <P> <parents...>"
//                       followed by its regressors
//   r2 <V> <values...>
void SCModel::write(std::ostream& out) const {
  out << "#macie-scm v1\n";
  out << "agents " << graph_.num_agents() << " features " << graph_.state_dim() << " actions "
      << num_actions_ << " model " << to_string(options_.model) << " seed " << options_.seed
      << " outcome " << to_string(options_.outcome.kind) << " trees " << options_.trees.n_trees
      << ' ' << options_.trees.max_depth << ' ' << options_.trees.min_samples_leaf << '\n';
  out << "edges " << graph_.edges().size() << '\n';
  for (const Edge& e : graph_.edges()) out << e.from << ' ' << e.to << ' ' << (e.candidate ? 1 : 0) << '\n';
  out << "equations " << equations_.size() << '\n';
  for (const auto& eq : equations_) {
    out << "equation " << eq.target << ' ' << eq.categories << ' ' << eq.parents.size();
    for (NodeId p : eq.parents) out << ' ' << p;
    out << '\n';
    for (const auto& r : eq.outputs) r.write(out);
  }
  out << "r2 " << validation_r2.size();
  for (double v : validation_r2) out << ' ' << shortest(v);
  out << '\n';
}

namespace {

void want(std::istream& in, const std::string& word) {
  std::string got;
  if (!(in >> got) || got != word) throw Error("malformed SCM file: expected '" + word + "'");
}

template <typename Int>
Int want_int(std::istream& in) {
  long long v = 0;
  if (!(in >> v) || v < 0) throw Error("malformed SCM file: bad integer");
  return static_cast<Int>(v);
}

}  // namespace

SCModel SCModel::read(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "#macie-scm v1") {
    throw Error("unsupported SCM file (expected header '#macie-scm v1')");
  }
  SCModel m;
  want(in, "agents");
  const auto n = want_int<std::size_t>(in);
  want(in, "features");
  const auto d = want_int<std::size_t>(in);
  want(in, "actions");
  m.num_actions_ = want_int<std::size_t>(in);
  want(in, "model");
  std::string kind;
  in >> kind;
  m.options_.model = model_kind_from_string(kind);
  want(in, "seed");
  in >> m.options_.seed;
  want(in, "outcome");
  in >> kind;
  m.options_.outcome.kind = outcome_kind_from_string(kind);
  want(in, "trees");
  m.options_.trees.n_trees = want_int<int>(in);
  m.options_.trees.max_depth = want_int<int>(in);
  m.options_.trees.min_samples_leaf = want_int<int>(in);
  m.graph_ = CausalGraph(n, d);
  want(in, "edges");
  const auto ne = want_int<std::size_t>(in);
  for (std::size_t k = 0; k < ne; ++k) {
    const auto from = want_int<NodeId>(in);
    const auto to = want_int<NodeId>(in);
    const auto cand = want_int<int>(in);
    m.graph_.add_edge(from, to, cand != 0);
  }
  if (!m.graph_.is_acyclic()) throw Error("malformed SCM file: graph has a cycle");
  want(in, "equations");
  const auto nq = want_int<std::size_t>(in);
  m.slot_.assign(m.graph_.nodes().size(), kNone);
  for (std::size_t k = 0; k < nq; ++k) {
    StructuralEquation eq;
    want(in, "equation");
    eq.target = want_int<NodeId>(in);
    eq.categories = want_int<std::size_t>(in);
    const auto np = want_int<std::size_t>(in);
    for (std::size_t p = 0; p < np; ++p) eq.parents.push_back(want_int<NodeId>(in));
    if (eq.target >= m.graph_.nodes().size() || eq.parents != m.graph_.parents(eq.target)) {
      throw Error("malformed SCM file: equation parents disagree with the graph");
    }
    eq.model = m.options_.model;
    const std::size_t outputs = eq.categories == 0 ? 1 : eq.categories;
    for (std::size_t c = 0; c < outputs; ++c) eq.outputs.push_back(Regressor::read(in));
    m.slot_[eq.target] = k;
    m.equations_.push_back(std::move(eq));
  }
  want(in, "r2");
  m.validation_r2.resize(want_int<std::size_t>(in));
  for (auto& v : m.validation_r2) {
    std::string tok;
    in >> tok;
    v = std::stod(tok);
  }
  return m;
}

void SCModel::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw Error("cannot write SCM file: " + path);
  write(f);
  if (!f) throw Error("error writing SCM file: " + path);
}

SCModel SCModel::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot read SCM file: " + path);
  return read(f);
}

}  // namespace macie
