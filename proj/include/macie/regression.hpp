#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "macie/rng.hpp"

namespace macie {

enum class ModelKind { constant_mean, linear, tree_ensemble };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& text);

struct TreeParams {
  int n_trees = 10;
  int max_depth = 5;
  int min_samples_leaf = 2;

  friend bool operator==(const TreeParams&, const TreeParams&) = default;
};

// Row-major design matrix.
struct Dataset {
  std::size_t cols = 0;
  std::vector<double> x;
  std::vector<double> y;

  std::size_t rows() const { return y.size(); }
  std::span<const double> row(std::size_t r) const { return {x.data() + r * cols, cols}; }
  void add_row(std::span<const double> features, double target);
  Dataset subset(std::span<const std::size_t> rows) const;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const;
  int depth() const;
  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;
};

// A fitted single-output regressor of one of the three model kinds.
class Regressor {
 public:
  Regressor() = default;

  static Regressor fit(ModelKind kind, const Dataset& data, const TreeParams& params,
                       RngStream rng);

  double predict(std::span<const double> x) const;
  ModelKind kind() const { return kind_; }
  std::size_t inputs() const { return inputs_; }

  double intercept() const { return intercept_; }
  const std::vector<double>& coefficients() const { return coef_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }

  void write(std::ostream& out) const;
  static Regressor read(std::istream& in);

  friend bool operator==(const Regressor&, const Regressor&) = default;

 private:
  ModelKind kind_ = ModelKind::constant_mean;
  std::size_t inputs_ = 0;
  double intercept_ = 0.0;  // constant_mean stores its mean here
  std::vector<double> coef_;
  std::vector<RegressionTree> trees_;
};

// Variance-reduction tree on the given rows (with repeats) of `data`.
RegressionTree fit_tree(const Dataset& data, std::span<const std::size_t> rows, int max_depth,
                        int min_samples_leaf);

// 1 - SSE/SST; a constant target scores 1 when SSE < 1e-12 and 0 otherwise.
double r_squared(std::span<const double> actual, std::span<const double> predicted);
double r_squared_from_sums(double sse, double sst);

}  // namespace macie
