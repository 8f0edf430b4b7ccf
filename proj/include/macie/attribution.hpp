#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "macie/core.hpp"
#include "macie/counterfactual.hpp"

namespace macie {

enum class AttrMethod { naive_cf, shapley_exact, shapley_mc };
std::string to_string(AttrMethod method);
AttrMethod attr_method_from_string(const std::string& text);

struct AttributionResult {
  std::vector<double> phi;
  std::vector<double> phi_hat;
  std::vector<std::size_t> rank;
  std::vector<double> ci_low;
  std::vector<double> ci_high;
  AttrMethod method = AttrMethod::shapley_mc;

  friend bool operator==(const AttributionResult&, const AttributionResult&) = default;
};

double mean_counterfactual(const std::vector<CFSample>& samples);
double causal_effect(double y_fact, double y_cf);

// Coalition -> value, evaluated lazily at most once per coalition, safe for concurrent
// callers.
class ValueFunction {
 public:
  using Evaluator = std::function<CoalitionValue(Coalition)>;

  ValueFunction(std::size_t num_agents, Evaluator evaluator);
  // Table indexed by coalition bitmask, size 2^N.
  static ValueFunction from_table(std::vector<double> values);
  // Backed by coalition_outcome on `sim`.
  static ValueFunction from_simulator(const Simulator& sim, const OutcomeSpec& spec,
                                      std::size_t threads = 1);

  std::size_t num_agents() const { return n_; }
  double operator()(Coalition s) const { return evaluate(s).value; }
  const CoalitionValue& evaluate(Coalition s) const;
  std::size_t evaluations() const;
  // Coalitions evaluated so far, ascending.
  std::vector<Coalition> evaluated() const;

 private:
  struct Entry {
    std::once_flag once;
    CoalitionValue value;
  };
  std::size_t n_;
  Evaluator eval_;
  mutable std::mutex mu_;
  mutable std::map<Coalition, std::shared_ptr<Entry>> cache_;
  mutable std::size_t calls_ = 0;
};

inline constexpr std::size_t kMaxExactAgents = 12;

std::vector<double> shapley_exact(const ValueFunction& v);
std::vector<double> shapley_exact(std::size_t num_agents, const std::function<double(Coalition)>& v);

using Permutation = std::vector<std::size_t>;

// M permutations of N agents. Within each block of N! draws no permutation repeats, so
// each draw is marginally uniform while small-N estimates cover the orderings evenly.
std::vector<Permutation> sample_permutations(std::size_t num_agents, std::size_t M,
                                             std::uint64_t seed);

struct MonteCarloShapley {
  std::vector<double> phi;
  std::vector<double> std_error;  // sample sd of the marginals / sqrt(M)
  std::vector<Permutation> permutations;
};

MonteCarloShapley shapley_mc_detailed(const ValueFunction& v, std::size_t M, std::uint64_t seed);
std::vector<double> shapley_mc(const ValueFunction& v, std::size_t M, std::uint64_t seed);
// Permutation estimator over a fixed permutation set, for any value lookup.
std::vector<double> shapley_from_permutations(std::size_t num_agents,
                                              const std::vector<Permutation>& perms,
                                              const std::function<double(Coalition)>& v);

std::vector<double> normalize(const std::vector<double>& phi);
// Agents by descending |phi|, ties to the lower index.
std::vector<std::size_t> rank(const std::vector<double>& phi);

struct BootstrapResult {
  std::vector<std::vector<double>> draws;  // B rows of per-agent statistics
  std::vector<double> low;
  std::vector<double> high;
  std::vector<double> std_error;
};

// Percentile quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double p);

// Resamples indices 0..n-1 with replacement B times from stream (seed, "bootstrap", [b]).
std::vector<std::vector<std::size_t>> bootstrap_indices(std::size_t n, std::size_t B,
                                                        std::uint64_t seed);

using IndexStatistic = std::function<std::vector<double>(std::span<const std::size_t>)>;

BootstrapResult bootstrap(std::size_t n_units, const IndexStatistic& statistic, std::size_t B,
                          double alpha, std::uint64_t seed, std::size_t threads = 1);

// Resamples episodes and recomputes `pipeline_fn` on each resampled history.
BootstrapResult bootstrap_ci(const History& history,
                             const std::function<std::vector<double>(const History&)>& pipeline_fn,
                             std::size_t B, double alpha, std::uint64_t seed, std::size_t threads = 1);

// Paired bootstrap sign test for phi_i vs phi_j.
double compare_agents(const std::vector<std::vector<double>>& draws,
                      const std::vector<double>& point, std::size_t i, std::size_t j);

}  // namespace macie
