#include "macie/regression.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "macie/core.hpp"
#include "macie/format.hpp"

namespace macie {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::constant_mean: return "constant_mean";
    case ModelKind::linear: return "linear";
    case ModelKind::tree_ensemble: return "tree_ensemble";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& text) {
  if (text == "constant_mean") return ModelKind::constant_mean;
  if (text == "linear") return ModelKind::linear;
  if (text == "tree_ensemble") return ModelKind::tree_ensemble;
  throw ConfigError("unknown model kind '" + text +
                    "' (valid: constant_mean, linear, tree_ensemble)");
}

void Dataset::add_row(std::span<const double> features, double target) {
  if (features.size() != cols) throw Error("dataset row has wrong width");
  x.insert(x.end(), features.begin(), features.end());
  y.push_back(target);
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.cols = cols;
  out.x.reserve(rows.size() * cols);
  out.y.reserve(rows.size());
  for (std::size_t r : rows) out.add_row(row(r), y[r]);
  return out;
}

double RegressionTree::predict(std::span<const double> x) const {
  int i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const TreeNode& n = nodes[static_cast<std::size_t>(i)];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

int RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  // Children always follow their parent in `nodes`.
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].feature < 0) continue;
    d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
    d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    best = std::max(best, d[i] + 1);
  }
  return best;
}

namespace {

// Splitter working on sample positions 0..n-1. For every feature, `order[f]` lists the
// positions sorted by that feature; each tree node owns the same contiguous segment
// [lo, hi) of every list, so a split is a stable partition of each segment.
class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, std::span<const std::size_t> rows, int max_depth,
              int min_leaf)
      : n_(rows.size()), f_(data.cols), max_depth_(max_depth), min_leaf_(std::max(1, min_leaf)) {
    col_.assign(f_, std::vector<double>(n_));
    y_.resize(n_);
    for (std::size_t p = 0; p < n_; ++p) {
      const auto r = data.row(rows[p]);
      for (std::size_t f = 0; f < f_; ++f) col_[f][p] = r[f];
      y_[p] = data.y[rows[p]];
    }
    order_.assign(f_, std::vector<std::uint32_t>(n_));
    for (std::size_t f = 0; f < f_; ++f) {
      auto& o = order_[f];
      std::iota(o.begin(), o.end(), 0u);
      const auto& c = col_[f];
      std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) { return c[a] < c[b]; });
    }
    left_flag_.assign(n_, 0);
    scratch_.resize(n_);
  }

  RegressionTree build() {
    RegressionTree tree;
    if (n_ == 0) {
      tree.nodes.push_back(TreeNode{});
      return tree;
    }
    grow(tree, 0, n_, 0);
    return tree;
  }

 private:
  int grow(RegressionTree& tree, std::size_t lo, std::size_t hi, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{});
    const std::size_t m = hi - lo;
    double sum = 0.0;
    for (std::size_t k = lo; k < hi; ++k) sum += y_[f_ == 0 ? k : order_[0][k]];
    const double mean = sum / static_cast<double>(m);
    tree.nodes[static_cast<std::size_t>(id)].value = mean;
    if (depth >= max_depth_ || m < 2 * static_cast<std::size_t>(min_leaf_) || f_ == 0) return id;

    // Best variance-reduction split; gain = sumL^2/nL + sumR^2/nR - sum^2/n.
    const double base = sum * sum / static_cast<double>(m);
    double best_gain = 1e-12 * std::max(1.0, std::abs(base));
    int best_f = -1;
    double best_thr = 0.0;
    std::size_t best_left = 0;
    for (std::size_t f = 0; f < f_; ++f) {
      const auto& o = order_[f];
      const auto& c = col_[f];
      if (c[o[lo]] == c[o[hi - 1]]) continue;
      double sl = 0.0;
      for (std::size_t k = lo; k + 1 < hi; ++k) {
        sl += y_[o[k]];
        const std::size_t nl = k + 1 - lo;
        const double a = c[o[k]];
        const double b = c[o[k + 1]];
        if (a == b) continue;
        if (nl < static_cast<std::size_t>(min_leaf_)) continue;
        const std::size_t nr = m - nl;
        if (nr < static_cast<std::size_t>(min_leaf_)) break;
        const double sr = sum - sl;
        const double gain = sl * sl / static_cast<double>(nl) + sr * sr / static_cast<double>(nr) - base;
        if (gain > best_gain) {
          best_gain = gain;
          best_f = static_cast<int>(f);
          best_thr = a + (b - a) / 2.0;
          best_left = nl;
        }
      }
    }
    if (best_f < 0) return id;

    const auto& split_order = order_[static_cast<std::size_t>(best_f)];
    for (std::size_t k = lo; k < hi; ++k) left_flag_[split_order[k]] = k < lo + best_left ? 1 : 0;
    for (std::size_t f = 0; f < f_; ++f) {
      auto& o = order_[f];
      std::size_t l = lo;
      std::size_t r = 0;
      for (std::size_t k = lo; k < hi; ++k) {
        if (left_flag_[o[k]]) o[l++] = o[k];
        else scratch_[r++] = o[k];
      }
      std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(r),
                o.begin() + static_cast<std::ptrdiff_t>(l));
    }
    const int left = grow(tree, lo, lo + best_left, depth + 1);
    const int right = grow(tree, lo + best_left, hi, depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best_f;
    node.threshold = best_thr;
    node.left = left;
    node.right = right;
    return id;
  }

  std::size_t n_;
  std::size_t f_;
  int max_depth_;
  int min_leaf_;
  std::vector<std::vector<double>> col_;
  std::vector<double> y_;
  std::vector<std::vector<std::uint32_t>> order_;
  std::vector<unsigned char> left_flag_;
  std::vector<std::uint32_t> scratch_;
};

void expect(std::istream& in, const std::string& word) {
  std::string got;
  if (!(in >> got) || got != word) throw Error("malformed model: expected '" + word + "'");
}

double read_real(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw Error("malformed model: missing number");
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw Error("malformed model: bad number '" + tok + "'");
    return v;
  } catch (const std::logic_error&) {
    throw Error("malformed model: bad number '" + tok + "'");
  }
}

template <typename Int>
Int read_int(std::istream& in) {
  long long v = 0;
  if (!(in >> v)) throw Error("malformed model: missing integer");
  return static_cast<Int>(v);
}

}  // namespace

RegressionTree fit_tree(const Dataset& data, std::span<const std::size_t> rows, int max_depth,
                        int min_samples_leaf) {
  return TreeBuilder(data, rows, max_depth, min_samples_leaf).build();
}

Regressor Regressor::fit(ModelKind kind, const Dataset& data, const TreeParams& params,
                         RngStream rng) {
  const std::size_t n = data.rows();
  if (n == 0) throw Error("cannot fit a regressor on zero rows");
  if (params.n_trees < 1 || params.max_depth < 1 || params.min_samples_leaf < 1) {
    throw ConfigError("tree hyperparameters must be positive");
  }
  Regressor out;
  out.kind_ = kind;
  out.inputs_ = data.cols;
  switch (kind) {
    case ModelKind::constant_mean: {
      out.intercept_ = std::accumulate(data.y.begin(), data.y.end(), 0.0) / static_cast<double>(n);
      break;
    }
    case ModelKind::linear: {
      const auto cols = static_cast<Eigen::Index>(data.cols + 1);
      Eigen::MatrixXd X(static_cast<Eigen::Index>(n), cols);
      Eigen::VectorXd Y(static_cast<Eigen::Index>(n));
      for (std::size_t r = 0; r < n; ++r) {
        const auto ri = static_cast<Eigen::Index>(r);
        X(ri, 0) = 1.0;
        const auto row = data.row(r);
        for (std::size_t c = 0; c < data.cols; ++c) X(ri, static_cast<Eigen::Index>(c + 1)) = row[c];
        Y(ri) = data.y[r];
      }
      // Minimum-norm least squares; one-hot blocks make X rank deficient by design.
      const Eigen::VectorXd beta = X.completeOrthogonalDecomposition().solve(Y);
      out.intercept_ = beta(0);
      out.coef_.resize(data.cols);
      for (std::size_t c = 0; c < data.cols; ++c) out.coef_[c] = beta(static_cast<Eigen::Index>(c + 1));
      break;
    }
    case ModelKind::tree_ensemble: {
      std::vector<std::size_t> bag(n);
      for (int t = 0; t < params.n_trees; ++t) {
        for (auto& b : bag) b = rng.uniform_index(n);
        out.trees_.push_back(fit_tree(data, bag, params.max_depth, params.min_samples_leaf));
      }
      break;
    }
  }
  return out;
}

double Regressor::predict(std::span<const double> x) const {
  switch (kind_) {
    case ModelKind::constant_mean: return intercept_;
    case ModelKind::linear: {
      double v = intercept_;
      for (std::size_t c = 0; c < coef_.size(); ++c) v += coef_[c] * x[c];
      return v;
    }
    case ModelKind::tree_ensemble: {
      double s = 0.0;
      for (const auto& t : trees_) s += t.predict(x);
      return trees_.empty() ? 0.0 : s / static_cast<double>(trees_.size());
    }
  }
  return 0.0;
}

void Regressor::write(std::ostream& out) const {
  out << "regressor " << to_string(kind_) << ' ' << inputs_ << ' ' << shortest(intercept_) << '\n';
  out << "coef " << coef_.size();
  for (double c : coef_) out << ' ' << shortest(c);
  out << '\n';
  out << "trees " << trees_.size() << '\n';
  for (const auto& t : trees_) {
    out << "tree " << t.nodes.size() << '\n';
    for (const auto& n : t.nodes) {
      out << n.feature << ' ' << shortest(n.threshold) << ' ' << n.left << ' ' << n.right << ' '
          << shortest(n.value) << '\n';
    }
  }
}

Regressor Regressor::read(std::istream& in) {
  Regressor r;
  expect(in, "regressor");
  std::string kind;
  in >> kind;
  r.kind_ = model_kind_from_string(kind);
  r.inputs_ = read_int<std::size_t>(in);
  r.intercept_ = read_real(in);
  expect(in, "coef");
  r.coef_.resize(read_int<std::size_t>(in));
  for (auto& c : r.coef_) c = read_real(in);
  expect(in, "trees");
  r.trees_.resize(read_int<std::size_t>(in));
  for (auto& t : r.trees_) {
    expect(in, "tree");
    t.nodes.resize(read_int<std::size_t>(in));
    for (auto& n : t.nodes) {
      n.feature = read_int<int>(in);
      n.threshold = read_real(in);
      n.left = read_int<int>(in);
      n.right = read_int<int>(in);
      n.value = read_real(in);
      const auto sz = static_cast<int>(t.nodes.size());
      if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= sz || n.right >= sz)) {
        throw Error("malformed model: tree child index out of range");
      }
    }
  }
  return r;
}

double r_squared_from_sums(double sse, double sst) {
  if (sst <= 1e-12) return sse < 1e-12 ? 1.0 : 0.0;
  return 1.0 - sse / sst;
}

double r_squared(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size()) throw Error("r_squared: length mismatch");
  if (actual.empty()) return 0.0;
  const double mean = std::accumulate(actual.begin(), actual.end(), 0.0) / static_cast<double>(actual.size());
  double sse = 0.0;
  double sst = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    sse += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
    sst += (actual[i] - mean) * (actual[i] - mean);
  }
  return r_squared_from_sums(sse, sst);
}

}  // namespace macie
