#pragma once

#include <cstddef>
#include <vector>

#include "macie/attribution.hpp"
#include "macie/core.hpp"

namespace macie {

struct Interaction {
  std::size_t i = 0;
  std::size_t j = 0;  // i < j
  double sigma = 0.0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};
using InteractionSet = std::vector<Interaction>;

struct CollectiveMetrics {
  double si = 0.0;
  double cs = 0.0;
  double ii = 0.0;  // nats
  InteractionSet interactions;
  std::vector<std::vector<double>> sigma;  // symmetric, zero diagonal

  friend bool operator==(const CollectiveMetrics&, const CollectiveMetrics&) = default;
};

inline constexpr double kSiDenominatorFloor = 1e-9;

double synergy(double y_all, double y_without_pair, double phi_i, double phi_j);

// Pairwise synergy with leave-one-out effects phi_i = v(A) - v(A \ {i}), all four terms
// read from the same value function.
std::vector<std::vector<double>> synergy_matrix(const ValueFunction& v);
std::vector<std::vector<double>> synergy_matrix(std::size_t num_agents,
                                                const std::function<double(Coalition)>& v);

InteractionSet interactions(const std::vector<std::vector<double>>& sigma, double tau_synergy);

// (Y(A) - sum_i Y({i})) / max(|Y(A)|, |sum|, 1e-9).
double synergy_index(double y_all, const std::vector<double>& individual);

double coordination_score(const History& history);

// Plug-in I(a_i; a_j | z) in nats, z the binned state signature.
double pair_information(const History& history, std::size_t i, std::size_t j, std::size_t n_bins = 4);
// Sum of pair_information over ordered pairs i != j.
double information_integration(const History& history, std::size_t n_bins = 4);

}  // namespace macie
