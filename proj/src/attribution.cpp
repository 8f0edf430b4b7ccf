#include "macie/attribution.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <set>

#include "macie/parallel.hpp"

namespace macie {

std::string to_string(AttrMethod method) {
  switch (method) {
    case AttrMethod::naive_cf: return "naive_cf";
    case AttrMethod::shapley_exact: return "shapley_exact";
    case AttrMethod::shapley_mc: return "shapley_mc";
  }
  return "unknown";
}

AttrMethod attr_method_from_string(const std::string& text) {
  if (text == "naive_cf") return AttrMethod::naive_cf;
  if (text == "shapley_exact") return AttrMethod::shapley_exact;
  if (text == "shapley_mc") return AttrMethod::shapley_mc;
  throw ConfigError("unknown attribution method '" + text +
                    "' (valid: naive_cf, shapley_exact, shapley_mc)");
}

double mean_counterfactual(const std::vector<CFSample>& samples) {
  if (samples.empty()) throw Error("mean_counterfactual: no samples");
  double s = 0.0;
  for (const auto& c : samples) s += c.y;
  return s / static_cast<double>(samples.size());
}

double causal_effect(double y_fact, double y_cf) { return y_fact - y_cf; }

ValueFunction::ValueFunction(std::size_t num_agents, Evaluator evaluator)
    : n_(num_agents), eval_(std::move(evaluator)) {
  if (n_ == 0 || n_ >= 64) throw ConfigError("value function needs 1 to 63 agents");
}

ValueFunction ValueFunction::from_table(std::vector<double> values) {
  std::size_t n = 0;
  while ((std::size_t{1} << n) < values.size()) ++n;
  if ((std::size_t{1} << n) != values.size() || n == 0) {
    throw ConfigError("coalition table size must be a power of two >= 2");
  }
  auto table = std::make_shared<std::vector<double>>(std::move(values));
  return ValueFunction(n, [table](Coalition s) {
    CoalitionValue cv;
    cv.coalition = s;
    cv.value = (*table)[s];
    return cv;
  });
}

ValueFunction ValueFunction::from_simulator(const Simulator& sim, const OutcomeSpec& spec,
                                            std::size_t threads) {
  return ValueFunction(sim.num_agents(), [&sim, spec, threads](Coalition s) {
    return coalition_outcome(s, sim, spec, threads);
  });
}

const CoalitionValue& ValueFunction::evaluate(Coalition s) const {
  if ((s & ~full_coalition(n_)) != 0) throw ConfigError("coalition names an unknown agent");
  std::shared_ptr<Entry> e;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto& slot = cache_[s];
    if (!slot) slot = std::make_shared<Entry>();
    e = slot;
  }
  std::call_once(e->once, [&] {
    e->value = eval_(s);
    std::lock_guard<std::mutex> lock(mu_);
    ++calls_;
  });
  return e->value;
}

std::size_t ValueFunction::evaluations() const {
  std::lock_guard<std::mutex> lock(mu_);
  return calls_;
}

std::vector<Coalition> ValueFunction::evaluated() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<Coalition> out;
  for (const auto& [s, _] : cache_) out.push_back(s);
  return out;
}

std::vector<double> shapley_exact(std::size_t n, const std::function<double(Coalition)>& v) {
  if (n > kMaxExactAgents) {
    throw ConfigError("shapley_exact supports at most " + std::to_string(kMaxExactAgents) +
                      " agents; use shapley_mc for larger systems");
  }
  if (n == 0) throw ConfigError("shapley_exact needs at least one agent");
  // w[s] = s! (n - s - 1)! / n!
  std::vector<double> w(n);
  for (std::size_t s = 0; s < n; ++s) {
    double x = 1.0 / static_cast<double>(n);
    // 1 / (n * C(n-1, s))
    for (std::size_t k = 1; k <= s; ++k) x *= static_cast<double>(k) / static_cast<double>(n - k);
    w[s] = x;
  }
  const Coalition full = full_coalition(n);
  std::vector<double> value(full + 1);
  for (Coalition s = 0; s <= full; ++s) value[s] = v(s);
  std::vector<double> phi(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Coalition bit = Coalition{1} << i;
    for (Coalition s = 0; s <= full; ++s) {
      if (s & bit) continue;
      phi[i] += w[static_cast<std::size_t>(std::popcount(s))] * (value[s | bit] - value[s]);
    }
  }
  return phi;
}

std::vector<double> shapley_exact(const ValueFunction& v) {
  return shapley_exact(v.num_agents(), [&v](Coalition s) { return v(s); });
}

namespace {

// Permutation with Lehmer rank r of {0..n-1}.
Permutation unrank(std::uint64_t r, std::size_t n) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::vector<std::uint64_t> fact(n + 1, 1);
  for (std::size_t k = 1; k <= n; ++k) fact[k] = fact[k - 1] * k;
  Permutation p;
  p.reserve(n);
  for (std::size_t k = n; k >= 1; --k) {
    const std::uint64_t q = r / fact[k - 1];
    r %= fact[k - 1];
    p.push_back(pool[static_cast<std::size_t>(q)]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(q));
  }
  return p;
}

constexpr std::size_t kMaxBlockAgents = 20;  // 20! < 2^63

}  // namespace

std::vector<Permutation> sample_permutations(std::size_t n, std::size_t M, std::uint64_t seed) {
  if (M < 1) throw ConfigError("M must be at least 1");
  if (n == 0) throw ConfigError("need at least one agent");
  RngStream rng = derive_stream(SeedTree{seed}, "shapley");
  std::vector<Permutation> out;
  out.reserve(M);
  if (n > kMaxBlockAgents) {
    for (std::size_t m = 0; m < M; ++m) {
      Permutation p(n);
      std::iota(p.begin(), p.end(), std::size_t{0});
      for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.uniform_index(i)]);
      out.push_back(std::move(p));
    }
    return out;
  }
  std::uint64_t total = 1;
  for (std::size_t k = 2; k <= n; ++k) total *= k;
  std::set<std::uint64_t> used;
  for (std::size_t m = 0; m < M; ++m) {
    if (used.size() == total) used.clear();
    std::uint64_t r = rng.uniform_index(total);
    while (used.count(r)) r = rng.uniform_index(total);
    used.insert(r);
    out.push_back(unrank(r, n));
  }
  return out;
}

std::vector<double> shapley_from_permutations(std::size_t n, const std::vector<Permutation>& perms,
                                              const std::function<double(Coalition)>& v) {
  if (perms.empty()) throw ConfigError("need at least one permutation");
  std::vector<double> phi(n, 0.0);
  for (const auto& p : perms) {
    Coalition s = 0;
    double prev = v(s);
    for (std::size_t agent : p) {
      s |= Coalition{1} << agent;
      const double cur = v(s);
      phi[agent] += cur - prev;
      prev = cur;
    }
  }
  for (double& x : phi) x /= static_cast<double>(perms.size());
  return phi;
}

MonteCarloShapley shapley_mc_detailed(const ValueFunction& v, std::size_t M, std::uint64_t seed) {
  const std::size_t n = v.num_agents();
  MonteCarloShapley out;
  out.permutations = sample_permutations(n, M, seed);
  std::vector<std::vector<double>> marg(n);
  for (const auto& p : out.permutations) {
    Coalition s = 0;
    double prev = v(s);
    for (std::size_t agent : p) {
      s |= Coalition{1} << agent;
      const double cur = v(s);
      marg[agent].push_back(cur - prev);
      prev = cur;
    }
  }
  out.phi.assign(n, 0.0);
  out.std_error.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = std::accumulate(marg[i].begin(), marg[i].end(), 0.0) / static_cast<double>(M);
    out.phi[i] = mean;
    if (M > 1) {
      double ss = 0.0;
      for (double x : marg[i]) ss += (x - mean) * (x - mean);
      out.std_error[i] = std::sqrt(ss / static_cast<double>(M - 1) / static_cast<double>(M));
    }
  }
  return out;
}

std::vector<double> shapley_mc(const ValueFunction& v, std::size_t M, std::uint64_t seed) {
  return shapley_mc_detailed(v, M, seed).phi;
}

std::vector<double> normalize(const std::vector<double>& phi) {
  if (phi.empty()) return {};
  double total = 0.0;
  for (double x : phi) {
    if (!std::isfinite(x)) throw Error("normalize: non-finite attribution");
    total += std::abs(x);
  }
  std::vector<double> out(phi.size());
  if (total > 0.0) {
    for (std::size_t i = 0; i < phi.size(); ++i) out[i] = phi[i] / total;
  } else {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(phi.size()));
  }
  return out;
}

std::vector<std::size_t> rank(const std::vector<double>& phi) {
  std::vector<std::size_t> order(phi.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(phi[a]) > std::abs(phi[b]); });
  return order;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw Error("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<std::vector<std::size_t>> bootstrap_indices(std::size_t n, std::size_t B, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> out(B, std::vector<std::size_t>(n));
  for (std::size_t b = 0; b < B; ++b) {
    RngStream rng = derive_stream(SeedTree{seed}, "bootstrap", {b});
    for (auto& i : out[b]) i = rng.uniform_index(n);
  }
  return out;
}

BootstrapResult bootstrap(std::size_t n_units, const IndexStatistic& statistic, std::size_t B,
                          double alpha, std::uint64_t seed, std::size_t threads) {
  if (n_units < 2) throw Error("bootstrap needs at least 2 episodes (resampling one is degenerate)");
  if (B < 10) throw ConfigError("bootstrap needs B >= 10 resamples");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("bootstrap alpha must lie in (0, 1)");
  const auto idx = bootstrap_indices(n_units, B, seed);
  BootstrapResult out;
  out.draws.resize(B);
  parallel_for(B, threads, [&](std::size_t b) { out.draws[b] = statistic(idx[b]); });
  const std::size_t k = out.draws.front().size();
  for (const auto& d : out.draws) {
    if (d.size() != k) throw Error("bootstrap statistic changed length between resamples");
  }
  out.low.resize(k);
  out.high.resize(k);
  out.std_error.resize(k);
  std::vector<double> col(B);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t b = 0; b < B; ++b) col[b] = out.draws[b][i];
    out.low[i] = quantile(col, alpha / 2.0);
    out.high[i] = quantile(col, 1.0 - alpha / 2.0);
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(B);
    double ss = 0.0;
    for (double x : col) ss += (x - mean) * (x - mean);
    out.std_error[i] = std::sqrt(ss / static_cast<double>(B - 1));
  }
  return out;
}

BootstrapResult bootstrap_ci(const History& history,
                             const std::function<std::vector<double>(const History&)>& pipeline_fn,
                             std::size_t B, double alpha, std::uint64_t seed, std::size_t threads) {
  return bootstrap(
      history.size(),
      [&](std::span<const std::size_t> idx) { return pipeline_fn(history.resample(idx)); }, B, alpha,
      seed, threads);
}

double compare_agents(const std::vector<std::vector<double>>& draws, const std::vector<double>& point,
                      std::size_t i, std::size_t j) {
  if (draws.empty()) throw Error("compare_agents: no bootstrap draws");
  if (i >= point.size() || j >= point.size()) throw ConfigError("agent index out of range");
  const double d0 = point[i] - point[j];
  if (d0 == 0.0) return 1.0;
  const double sign = d0 > 0.0 ? 1.0 : -1.0;
  std::size_t against = 0;
  for (const auto& d : draws) {
    if ((d.at(i) - d.at(j)) * sign <= 0.0) ++against;
  }
  return std::min(1.0, 2.0 * static_cast<double>(against) / static_cast<double>(draws.size()));
}

}  // namespace macie
