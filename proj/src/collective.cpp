#include "macie/collective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

namespace macie {

double synergy(double y_all, double y_without_pair, double phi_i, double phi_j) {
  return y_all - y_without_pair - phi_i - phi_j;
}

std::vector<std::vector<double>> synergy_matrix(std::size_t n, const std::function<double(Coalition)>& v) {
  const Coalition full = full_coalition(n);
  const double y_all = v(full);
  std::vector<std::vector<double>> sigma(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const Coalition bi = Coalition{1} << i;
    for (std::size_t j = i + 1; j < n; ++j) {
      const Coalition bj = Coalition{1} << j;
      const double phi_i = y_all - v(full & ~bi);
      const double phi_j = y_all - v(full & ~bj);
      sigma[i][j] = sigma[j][i] = synergy(y_all, v(full & ~bi & ~bj), phi_i, phi_j);
    }
  }
  return sigma;
}

std::vector<std::vector<double>> synergy_matrix(const ValueFunction& v) {
  return synergy_matrix(v.num_agents(), [&v](Coalition s) { return v(s); });
}

InteractionSet interactions(const std::vector<std::vector<double>>& sigma, double tau_synergy) {
  if (tau_synergy < 0.0 || std::isnan(tau_synergy)) throw ConfigError("tau_synergy must be non-negative");
  InteractionSet out;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    for (std::size_t j = i + 1; j < sigma[i].size(); ++j) {
      if (std::abs(sigma[i][j]) > tau_synergy) out.push_back({i, j, sigma[i][j]});
    }
  }
  return out;
}

double synergy_index(double y_all, const std::vector<double>& individual) {
  if (individual.size() < 2) throw ConfigError("synergy index needs at least 2 agents");
  double sum = 0.0;
  for (double y : individual) sum += y;
  const double den = std::max({std::abs(y_all), std::abs(sum), kSiDenominatorFloor});
  return (y_all - sum) / den;
}

namespace {

double agent_correlation(const JointAction& a, const JointAction& b) {
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return a == b ? 1.0 : 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

double coordination_score(const History& history) {
  if (history.num_agents < 2) throw ConfigError("coordination score needs at least 2 agents");
  double total = 0.0;
  std::size_t used = 0;
  for (const Episode& ep : history.episodes) {
    if (ep.steps.size() < 2) continue;
    double s = 0.0;
    for (std::size_t t = 1; t < ep.steps.size(); ++t) {
      s += agent_correlation(ep.steps[t].joint_action, ep.steps[t - 1].joint_action);
    }
    total += s / static_cast<double>(ep.steps.size() - 1);
    ++used;
  }
  if (used == 0) throw Error("coordination score needs episodes with at least 2 steps");
  return total / static_cast<double>(used);
}

namespace {

// State signature per (episode, t): each feature binned into n_bins equal-width bins
// over its observed range; constant features fall in bin 0.
std::vector<std::vector<int>> signatures(const History& h, std::size_t n_bins) {
  const std::size_t d = h.state_dim();
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (const Episode& ep : h.episodes) {
    for (const Step& s : ep.steps) {
      for (std::size_t f = 0; f < d; ++f) {
        lo[f] = std::min(lo[f], s.state[f]);
        hi[f] = std::max(hi[f], s.state[f]);
      }
    }
  }
  std::vector<std::vector<int>> out;
  for (const Episode& ep : h.episodes) {
    for (const Step& s : ep.steps) {
      std::vector<int> sig(d, 0);
      for (std::size_t f = 0; f < d; ++f) {
        const double w = hi[f] - lo[f];
        if (w <= 0.0) continue;
        const auto b = static_cast<long>(std::floor((s.state[f] - lo[f]) / w * static_cast<double>(n_bins)));
        sig[f] = static_cast<int>(std::clamp<long>(b, 0, static_cast<long>(n_bins) - 1));
      }
      out.push_back(std::move(sig));
    }
  }
  return out;
}

double conditional_mi(const std::vector<std::size_t>& z, const std::vector<int>& x,
                      const std::vector<int>& y) {
  const double n = static_cast<double>(z.size());
  if (z.empty()) return 0.0;
  std::map<std::tuple<std::size_t, int, int>, double> pzxy;
  std::map<std::pair<std::size_t, int>, double> pzx;
  std::map<std::pair<std::size_t, int>, double> pzy;
  std::map<std::size_t, double> pz;
  for (std::size_t k = 0; k < z.size(); ++k) {
    pzxy[{z[k], x[k], y[k]}] += 1;
    pzx[{z[k], x[k]}] += 1;
    pzy[{z[k], y[k]}] += 1;
    pz[z[k]] += 1;
  }
  double mi = 0.0;
  for (const auto& [key, c] : pzxy) {
    const auto& [zz, xx, yy] = key;
    mi += c / n * std::log(c * pz[zz] / (pzx[{zz, xx}] * pzy[{zz, yy}]));
  }
  return std::max(0.0, mi);
}

}  // namespace

double pair_information(const History& history, std::size_t i, std::size_t j, std::size_t n_bins) {
  if (n_bins < 1) throw ConfigError("n_bins must be positive");
  const auto sigs = signatures(history, n_bins);
  std::map<std::vector<int>, std::size_t> ids;
  std::vector<std::size_t> z;
  std::vector<int> x;
  std::vector<int> y;
  std::size_t k = 0;
  for (const Episode& ep : history.episodes) {
    for (const Step& s : ep.steps) {
      z.push_back(ids.try_emplace(sigs[k++], ids.size()).first->second);
      x.push_back(s.joint_action.at(i));
      y.push_back(s.joint_action.at(j));
    }
  }
  return conditional_mi(z, x, y);
}

double information_integration(const History& history, std::size_t n_bins) {
  if (history.empty()) throw Error("information integration: no episodes");
  double total = 0.0;
  for (std::size_t i = 0; i < history.num_agents; ++i) {
    for (std::size_t j = 0; j < history.num_agents; ++j) {
      if (i != j) total += pair_information(history, i, j, n_bins);
    }
  }
  return total;
}

}  // namespace macie
