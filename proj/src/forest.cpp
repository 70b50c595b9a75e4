#include "omm/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "omm/errors.hpp"
#include "omm/io.hpp"
#include "omm/parallel.hpp"

namespace omm {

ForestHyperparams ForestHyperparams::classifier_defaults() {
  ForestHyperparams h;
  h.min_leaf_size = 5;
  return h;
}

ForestHyperparams ForestHyperparams::regressor_defaults() {
  ForestHyperparams h;
  h.min_leaf_size = 10;
  return h;
}

void ForestHyperparams::validate() const {
  if (n_trees < 1) throw ValidationError("forest: n_trees must be >= 1");
  if (min_leaf_size < 1) throw ValidationError("forest: min_leaf_size must be >= 1");
  if (max_depth && *max_depth < 0) throw ValidationError("forest: max_depth must be >= 0");
  if (max_features.kind == MaxFeatures::Kind::Fraction && !(max_features.value > 0.0 && max_features.value <= 1.0))
    throw ValidationError("forest: max_features fraction must lie in (0, 1]");
  if (max_features.kind == MaxFeatures::Kind::Count && max_features.value < 1.0)
    throw ValidationError("forest: max_features count must be >= 1");
}

Index resolve_max_features(const ForestHyperparams& hyper, Index n_features, ForestTask task) {
  const auto d = static_cast<double>(n_features);
  Index m = 0;
  switch (hyper.max_features.kind) {
    case MaxFeatures::Kind::Default:
      m = static_cast<Index>(task == ForestTask::Classification ? std::ceil(std::sqrt(d)) : std::ceil(d / 3.0));
      break;
    case MaxFeatures::Kind::Count:
      m = static_cast<Index>(hyper.max_features.value);
      if (m > n_features)
        throw ValidationError("forest: max_features " + std::to_string(m) + " exceeds " +
                              std::to_string(n_features) + " features");
      break;
    case MaxFeatures::Kind::Fraction:
      m = static_cast<Index>(std::ceil(hyper.max_features.value * d));
      break;
  }
  return std::clamp<Index>(m, 1, std::max<Index>(n_features, 1));
}

int DecisionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (!nodes[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

Index DecisionTree::n_leaves() const {
  return std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); });
}

DecisionTree fit_tree(const Matrix& X, std::span<const double> y, std::span<const std::int32_t> sample,
                      ForestTask task, const ForestHyperparams& hyper, Rng& rng) {
  if (sample.empty() || X.rows() == 0) throw DataError("fit_tree: empty input");
  if (static_cast<Index>(y.size()) != X.rows()) throw DataError("fit_tree: X and y row counts differ");
  const Index d = X.cols();
  const Index mtry = resolve_max_features(hyper, d, task);
  const auto min_leaf = static_cast<std::int32_t>(hyper.min_leaf_size);

  DecisionTree tree;
  std::vector<std::int32_t> work(sample.begin(), sample.end());
  std::vector<Index> features(static_cast<std::size_t>(d));
  std::iota(features.begin(), features.end(), Index{0});
  std::vector<Index> candidates;
  std::vector<std::pair<double, double>> buf;

  struct Frame {
    std::int32_t node, begin, end;
    int depth;
  };
  tree.nodes.emplace_back();
  std::vector<Frame> stack{{0, 0, static_cast<std::int32_t>(work.size()), 0}};

  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    const auto rows = std::span(work).subspan(static_cast<std::size_t>(f.begin), static_cast<std::size_t>(f.end - f.begin));
    const auto n = static_cast<std::int32_t>(rows.size());

    bool pure = true;
    const double y0 = y[static_cast<std::size_t>(rows[0])];
    for (auto r : rows) {
      if (y[static_cast<std::size_t>(r)] != y0) {
        pure = false;
        break;
      }
    }
    const bool can_split = !pure && n >= 2 * min_leaf && (!hyper.max_depth || f.depth < *hyper.max_depth);

    std::int32_t best_feature = -1;
    double best_threshold = 0.0;
    double best_score = -std::numeric_limits<double>::infinity();
    if (can_split) {
      for (Index i = 0; i < mtry; ++i) {
        const auto j = i + static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(d - i)));
        std::swap(features[static_cast<std::size_t>(i)], features[static_cast<std::size_t>(j)]);
      }
      candidates.assign(features.begin(), features.begin() + mtry);
      std::sort(candidates.begin(), candidates.end());

      for (Index feat : candidates) {
        buf.clear();
        double total = 0.0;
        for (auto r : rows) {
          buf.emplace_back(X(r, feat), y[static_cast<std::size_t>(r)]);
          total += y[static_cast<std::size_t>(r)];
        }
        std::sort(buf.begin(), buf.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        if (buf.front().first == buf.back().first) continue;

        // Both criteria reduce to maximizing sum over children of (sum^2 / size) per
        // class (Gini) or of the target (variance).
        double left = 0.0;
        for (std::int32_t i = 0; i + 1 < n; ++i) {
          left += buf[static_cast<std::size_t>(i)].second;
          const std::int32_t nl = i + 1;
          const std::int32_t nr = n - nl;
          if (nl < min_leaf) continue;
          if (nr < min_leaf) break;
          const double xa = buf[static_cast<std::size_t>(i)].first;
          const double xb = buf[static_cast<std::size_t>(i + 1)].first;
          if (xa == xb) continue;
          const double right = total - left;
          double score = left * left / nl + right * right / nr;
          if (task == ForestTask::Classification) {
            const double l0 = nl - left;
            const double r0 = nr - right;
            score += l0 * l0 / nl + r0 * r0 / nr;
          }
          if (best_feature < 0 || score > best_score + 1e-12 * std::abs(best_score)) {
            best_score = score;
            best_feature = static_cast<std::int32_t>(feat);
            double thr = xa + (xb - xa) / 2.0;
            if (!(thr < xb)) thr = xa;
            best_threshold = thr;
          }
        }
      }
    }

    if (best_feature < 0) {
      auto& node = tree.nodes[static_cast<std::size_t>(f.node)];
      node.leaf_begin = static_cast<std::int32_t>(tree.leaf_rows.size());
      node.leaf_size = n;
      double s = 0.0;
      for (auto r : rows) s += y[static_cast<std::size_t>(r)];
      node.value = s / n;
      tree.leaf_rows.insert(tree.leaf_rows.end(), rows.begin(), rows.end());
      continue;
    }

    auto mid = std::stable_partition(rows.begin(), rows.end(),
                                     [&](std::int32_t r) { return X(r, best_feature) <= best_threshold; });
    const auto split = f.begin + static_cast<std::int32_t>(mid - rows.begin());
    const auto left_id = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[static_cast<std::size_t>(f.node)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = left_id;
    node.right = left_id + 1;
    stack.push_back({left_id + 1, split, f.end, f.depth + 1});
    stack.push_back({left_id, f.begin, split, f.depth + 1});
  }
  return tree;
}

DecisionTree fit_tree(const Matrix& X, std::span<const double> y, ForestTask task, const ForestHyperparams& hyper,
                      Rng& rng) {
  std::vector<std::int32_t> all(static_cast<std::size_t>(X.rows()));
  std::iota(all.begin(), all.end(), 0);
  return fit_tree(X, y, all, task, hyper, rng);
}

namespace {

std::vector<DecisionTree> fit_ensemble(const Matrix& X, std::span<const double> y, ForestTask task,
                                       const ForestHyperparams& hyper) {
  hyper.validate();
  if (X.rows() == 0) throw DataError("forest: empty input");
  if (X.rows() > std::numeric_limits<std::int32_t>::max()) throw DataError("forest: too many rows");
  const auto n = static_cast<std::uint64_t>(X.rows());
  std::vector<DecisionTree> trees(static_cast<std::size_t>(hyper.n_trees));
  parallel_for(trees.size(), hyper.threads, [&](std::size_t t) {
    Rng rng(derive_seed(hyper.seed, {static_cast<std::uint64_t>(t)}));
    std::vector<std::int32_t> sample(n);
    if (hyper.bootstrap) {
      for (auto& s : sample) s = static_cast<std::int32_t>(uniform_index(rng, n));
    } else {
      std::iota(sample.begin(), sample.end(), 0);
    }
    trees[t] = fit_tree(X, y, sample, task, hyper, rng);
  });
  return trees;
}

}  // namespace

ProbClassifier fit_classifier(const Matrix& X, std::span<const int> labels, const ForestHyperparams& hyper) {
  if (static_cast<Index>(labels.size()) != X.rows()) throw DataError("fit_classifier: X and labels row counts differ");
  std::vector<double> y(labels.size());
  bool has0 = false, has1 = false;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError("fit_classifier: labels must be 0 or 1");
    has0 |= labels[i] == 0;
    has1 |= labels[i] == 1;
    y[i] = labels[i];
  }
  if (!has0 || !has1) throw ModelError("fit_classifier: labels contain a single class");

  ProbClassifier clf;
  clf.n_features = X.cols();
  clf.trees = fit_ensemble(X, y, ForestTask::Classification, hyper);

  const auto n = static_cast<std::size_t>(X.rows());
  std::vector<double> p_sum(n, 0.0);
  std::vector<int> votes(n, 0);
  std::vector<char> in_bag(n);
  for (const auto& tree : clf.trees) {
    std::fill(in_bag.begin(), in_bag.end(), 0);
    for (auto r : tree.leaf_rows) in_bag[static_cast<std::size_t>(r)] = 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (in_bag[i]) continue;
      p_sum[i] += tree.leaf(X.row(static_cast<Index>(i)).transpose()).value;
      ++votes[i];
    }
  }
  std::size_t scored = 0, correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (votes[i] == 0) continue;
    ++scored;
    const int predicted = p_sum[i] / votes[i] > 0.5 ? 1 : 0;
    correct += predicted == labels[i];
  }
  clf.oob_accuracy = scored > 0 ? static_cast<double>(correct) / static_cast<double>(scored)
                                : std::numeric_limits<double>::quiet_NaN();
  return clf;
}

std::array<double, 2> ProbClassifier::predict_proba(const ConstRowRef& x) const {
  if (x.size() != n_features)
    throw DataError("predict_proba: expected " + std::to_string(n_features) + " features, got " +
                    std::to_string(x.size()));
  double p1 = 0.0;
  for (const auto& tree : trees) p1 += tree.leaf(x).value;
  p1 /= static_cast<double>(trees.size());
  return {1.0 - p1, p1};
}

QuantileForest fit_qrf(const Matrix& X, std::span<const double> y, const ForestHyperparams& hyper, bool log_target) {
  if (y.empty()) throw DataError("fit_qrf: empty input");
  if (static_cast<Index>(y.size()) != X.rows()) throw DataError("fit_qrf: X and y row counts differ");
  std::vector<double> z(y.begin(), y.end());
  if (log_target) {
    for (auto& v : z) {
      if (!(v >= 0.0)) throw DataError("fit_qrf: log-scale targets must be non-negative");
      v = std::log1p(v);
    }
  }
  QuantileForest qrf;
  qrf.n_features = X.cols();
  qrf.log_target = log_target;
  qrf.targets = Eigen::Map<const Vector>(y.data(), static_cast<Index>(y.size()));
  std::vector<double> support(y.begin(), y.end());
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());
  qrf.support = Eigen::Map<const Vector>(support.data(), static_cast<Index>(support.size()));
  qrf.rank.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    qrf.rank[i] = static_cast<std::int32_t>(std::lower_bound(support.begin(), support.end(), y[i]) - support.begin());
  qrf.trees = fit_ensemble(X, z, ForestTask::Regression, hyper);
  return qrf;
}

void QuantileForest::check_dimension(const ConstRowRef& x) const {
  if (x.size() != n_features)
    throw DataError("quantile forest: expected " + std::to_string(n_features) + " features, got " +
                    std::to_string(x.size()));
}

Vector QuantileForest::weights(const ConstRowRef& x) const {
  check_dimension(x);
  Vector w = Vector::Zero(support.size());
  const double per_tree = 1.0 / static_cast<double>(trees.size());
  for (const auto& tree : trees) {
    const auto& leaf = tree.leaf(x);
    const double share = per_tree / leaf.leaf_size;
    for (auto r : tree.rows(leaf)) w(rank[static_cast<std::size_t>(r)]) += share;
  }
  return w;
}

double weighted_quantile(const Vector& support, const Vector& weights, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile level must lie in [0, 1], got " + std::to_string(q));
  double acc = 0.0;
  Index last = -1;
  for (Index k = 0; k < support.size(); ++k) {
    if (weights(k) <= 0.0) continue;
    last = k;
    acc += weights(k);
    if (acc >= q - 1e-12) return support(k);
  }
  if (last < 0) throw ModelError("weighted_quantile: all weights are zero");
  return support(last);
}

double QuantileForest::quantile(const ConstRowRef& x, double q) const {
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile level must lie in [0, 1], got " + std::to_string(q));
  return weighted_quantile(support, weights(x), q);
}

namespace {

constexpr std::uint32_t kTreeTag = 0x54524545;  // "TREE"

void save_trees(io::BinaryWriter& w, const std::vector<DecisionTree>& trees) {
  w.put<std::uint64_t>(trees.size());
  for (const auto& t : trees) {
    w.put(kTreeTag);
    std::vector<std::int32_t> feature, left, right, begin, size;
    std::vector<double> threshold, value;
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      left.push_back(n.left);
      right.push_back(n.right);
      begin.push_back(n.leaf_begin);
      size.push_back(n.leaf_size);
      threshold.push_back(n.threshold);
      value.push_back(n.value);
    }
    w.put(feature);
    w.put(threshold);
    w.put(left);
    w.put(right);
    w.put(begin);
    w.put(size);
    w.put(value);
    w.put(t.leaf_rows);
  }
}

std::vector<DecisionTree> load_trees(io::BinaryReader& r) {
  std::vector<DecisionTree> trees(static_cast<std::size_t>(r.get<std::uint64_t>()));
  for (auto& t : trees) {
    if (r.get<std::uint32_t>() != kTreeTag) throw DataError("corrupt archive: bad tree tag");
    const auto feature = r.get_vector<std::int32_t>();
    const auto threshold = r.get_vector<double>();
    const auto left = r.get_vector<std::int32_t>();
    const auto right = r.get_vector<std::int32_t>();
    const auto begin = r.get_vector<std::int32_t>();
    const auto size = r.get_vector<std::int32_t>();
    const auto value = r.get_vector<double>();
    t.leaf_rows = r.get_vector<std::int32_t>();
    const auto m = feature.size();
    if (threshold.size() != m || left.size() != m || right.size() != m || begin.size() != m || size.size() != m ||
        value.size() != m)
      throw DataError("corrupt archive: inconsistent tree arrays");
    t.nodes.resize(m);
    for (std::size_t i = 0; i < m; ++i)
      t.nodes[i] = {feature[i], threshold[i], left[i], right[i], begin[i], size[i], value[i]};
  }
  return trees;
}

}  // namespace

void save(io::BinaryWriter& w, const ProbClassifier& clf) {
  w.put<std::int64_t>(clf.n_features);
  w.put(clf.oob_accuracy);
  save_trees(w, clf.trees);
}

void save(io::BinaryWriter& w, const QuantileForest& qrf) {
  w.put<std::int64_t>(qrf.n_features);
  w.put<std::uint8_t>(qrf.log_target ? 1 : 0);
  w.put(qrf.targets);
  w.put(qrf.support);
  w.put(qrf.rank);
  save_trees(w, qrf.trees);
}

ProbClassifier load_classifier(io::BinaryReader& r) {
  ProbClassifier clf;
  clf.n_features = r.get<std::int64_t>();
  clf.oob_accuracy = r.get<double>();
  clf.trees = load_trees(r);
  return clf;
}

QuantileForest load_qrf(io::BinaryReader& r) {
  QuantileForest qrf;
  qrf.n_features = r.get<std::int64_t>();
  qrf.log_target = r.get<std::uint8_t>() != 0;
  qrf.targets = r.get_eigen_vector();
  qrf.support = r.get_eigen_vector();
  qrf.rank = r.get_vector<std::int32_t>();
  qrf.trees = load_trees(r);
  return qrf;
}

}  // namespace omm
