#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "omm/rng.hpp"
#include "omm/types.hpp"

namespace omm {

enum class ForestTask { Classification, Regression };

/// Features tried per split: task default (ceil(sqrt d) / ceil(d/3)), an absolute count, or a fraction of d.
struct MaxFeatures {
  enum class Kind { Default, Count, Fraction };
  Kind kind = Kind::Default;
  double value = 0.0;

  static MaxFeatures count(int n) { return {Kind::Count, static_cast<double>(n)}; }
  static MaxFeatures fraction(double f) { return {Kind::Fraction, f}; }
};

struct ForestHyperparams {
  int n_trees = 500;
  MaxFeatures max_features;
  int min_leaf_size = 5;
  std::optional<int> max_depth;
  bool bootstrap = true;
  std::uint64_t seed = 0;
  int threads = 1;

  static ForestHyperparams classifier_defaults();
  static ForestHyperparams regressor_defaults();

  void validate() const;
};

Index resolve_max_features(const ForestHyperparams& hyper, Index n_features, ForestTask task);

/// Either a split (x[feature] <= threshold goes left) or a leaf holding the
/// training rows routed to it (bootstrap duplicates included).
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int32_t leaf_begin = 0;
  std::int32_t leaf_size = 0;
  double value = 0.0;  // class-1 frequency or mean target

  bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  std::vector<std::int32_t> leaf_rows;

  const TreeNode& leaf(const ConstRowRef& x) const {
    std::int32_t i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x(n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)];
  }

  std::span<const std::int32_t> rows(const TreeNode& leaf) const {
    return {leaf_rows.data() + leaf.leaf_begin, static_cast<std::size_t>(leaf.leaf_size)};
  }

  int depth() const;
  Index n_leaves() const;
};

/// Greedy CART on the rows listed in `sample` (duplicates allowed). Gini for
/// classification (labels 0/1 in `y`), variance reduction for regression.
/// Ties keep the lowest feature index, then the lowest threshold.
DecisionTree fit_tree(const Matrix& X, std::span<const double> y, std::span<const std::int32_t> sample,
                      ForestTask task, const ForestHyperparams& hyper, Rng& rng);

/// Convenience overload fitting on every row once.
DecisionTree fit_tree(const Matrix& X, std::span<const double> y, ForestTask task, const ForestHyperparams& hyper,
                      Rng& rng);

/// Random forest over binary labels with averaged leaf class frequencies.
struct ProbClassifier {
  std::vector<DecisionTree> trees;
  Index n_features = 0;
  double oob_accuracy = 0.0;  // NaN when no row was ever out of bag

  /// (P(label 0), P(label 1)).
  std::array<double, 2> predict_proba(const ConstRowRef& x) const;
};

ProbClassifier fit_classifier(const Matrix& X, std::span<const int> labels, const ForestHyperparams& hyper);

inline std::array<double, 2> predict_proba(const ProbClassifier& clf, const ConstRowRef& x) {
  return clf.predict_proba(x);
}

/// Quantile regression forest. Splits may be learned on log1p(y); leaves keep
/// references to the original-scale targets, so quantiles are exact training values.
struct QuantileForest {
  std::vector<DecisionTree> trees;
  Index n_features = 0;
  bool log_target = true;
  Vector targets;                  // training targets, original scale
  Vector support;                  // sorted unique targets
  std::vector<std::int32_t> rank;  // position of targets[i] in support

  /// Weight of every support point for input x; non-negative and summing to one.
  Vector weights(const ConstRowRef& x) const;
  /// Generalized inverse of the weighted CDF: smallest support point y with F(y|x) >= q.
  double quantile(const ConstRowRef& x, double q) const;
  double sample(const ConstRowRef& x, Rng& rng) const { return quantile(x, uniform01(rng)); }

 private:
  void check_dimension(const ConstRowRef& x) const;
};

QuantileForest fit_qrf(const Matrix& X, std::span<const double> y, const ForestHyperparams& hyper,
                       bool log_target = true);

/// Inverse of a discrete weighted CDF over ascending `support`.
double weighted_quantile(const Vector& support, const Vector& weights, double q);

inline double qrf_quantile(const QuantileForest& qrf, const ConstRowRef& x, double q) { return qrf.quantile(x, q); }
inline double qrf_sample(const QuantileForest& qrf, const ConstRowRef& x, Rng& rng) { return qrf.sample(x, rng); }

namespace io {
class BinaryWriter;
class BinaryReader;
}  // namespace io

void save(io::BinaryWriter& w, const ProbClassifier& clf);
void save(io::BinaryWriter& w, const QuantileForest& qrf);
ProbClassifier load_classifier(io::BinaryReader& r);
QuantileForest load_qrf(io::BinaryReader& r);

}  // namespace omm
