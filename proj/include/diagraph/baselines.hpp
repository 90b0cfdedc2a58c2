#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "diagraph/errors.hpp"
#include "diagraph/rng.hpp"
#include "diagraph/tensor.hpp"
#include "diagraph/training.hpp"

namespace diagraph {

// Column means of the node feature/embedding matrix; the baseline analogue
// of the models' mean readout.
inline std::vector<double> graph_mean_vector(const Mat& node_matrix) {
  if (node_matrix.rows == 0) throw ShapeError("cannot average an empty node matrix");
  std::vector<double> out(node_matrix.cols, 0.0);
  for (std::size_t i = 0; i < node_matrix.rows; ++i) {
    for (std::size_t j = 0; j < node_matrix.cols; ++j) out[j] += node_matrix.at(i, j);
  }
  for (double& v : out) v /= static_cast<double>(node_matrix.rows);
  return out;
}

// Stratified guessing: draws each prediction from the training label
// distribution.
inline std::vector<int> dummy_predict(const std::vector<int>& train_labels, std::size_t n_classes,
                                      std::size_t n_predictions, std::uint64_t seed) {
  if (train_labels.empty()) throw LabelError("dummy baseline needs training labels");
  std::vector<double> counts(n_classes, 0.0);
  for (int l : train_labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= n_classes) {
      throw LabelError("label " + std::to_string(l) + " outside vocabulary");
    }
    counts[static_cast<std::size_t>(l)] += 1.0;
  }
  Rng rng(seed);
  std::vector<int> out(n_predictions, 0);
  for (std::size_t i = 0; i < n_predictions; ++i) {
    out[i] = static_cast<int>(rng.weighted_index(counts));
  }
  return out;
}

// --- random forest ---------------------------------------------------------

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 0;      // 0 = unbounded
  std::size_t min_samples = 2;    // split only nodes with at least this many
};

namespace forest_detail {

struct TreeNode {
  bool leaf = true;
  int label = 0;
  std::size_t feature = 0;
  double threshold = 0.0;
  std::size_t left = 0, right = 0;
};

struct Tree {
  std::vector<TreeNode> nodes;

  int predict(const Mat& x, std::size_t row) const {
    std::size_t at = 0;
    while (!nodes[at].leaf) {
      at = (x.at(row, nodes[at].feature) <= nodes[at].threshold) ? nodes[at].left
                                                                 : nodes[at].right;
    }
    return nodes[at].label;
  }
};

// Weighted Gini impurity of a label multiset.
inline double gini(const std::vector<double>& class_weight_sums, double total) {
  if (total <= 0.0) return 0.0;
  double sum_sq = 0.0;
  for (double w : class_weight_sums) sum_sq += (w / total) * (w / total);
  return 1.0 - sum_sq;
}

struct SplitChoice {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double score = 0.0;  // weighted impurity after the split, lower is better
};

inline int weighted_majority(const std::vector<double>& class_weight_sums) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < class_weight_sums.size(); ++c) {
    if (class_weight_sums[c] > class_weight_sums[best]) best = c;  // ties keep lowest index
  }
  return static_cast<int>(best);
}

}  // namespace forest_detail

class RandomForest {
 public:
  std::size_t n_classes() const { return n_classes_; }
  std::size_t size() const { return trees_.size(); }

  std::vector<int> predict(const Mat& x) const {
    if (trees_.empty()) throw UsageError("forest has no trees");
    if (x.cols != n_features_) {
      throw ShapeError("forest expects " + std::to_string(n_features_) + " features, got " +
                       std::to_string(x.cols));
    }
    std::vector<int> out(x.rows, 0);
    for (std::size_t i = 0; i < x.rows; ++i) {
      std::vector<std::size_t> votes(n_classes_, 0);
      for (const auto& tree : trees_) votes[static_cast<std::size_t>(tree.predict(x, i))] += 1;
      std::size_t best = 0;
      for (std::size_t c = 1; c < n_classes_; ++c) {
        if (votes[c] > votes[best]) best = c;  // ties keep lowest index
      }
      out[i] = static_cast<int>(best);
    }
    return out;
  }

  void shuffle_trees(Rng& rng) { rng.shuffle(trees_); }

  friend RandomForest forest_fit(const Mat&, const std::vector<int>&, std::size_t,
                                 const ForestConfig&, std::uint64_t);

 private:
  std::vector<forest_detail::Tree> trees_;
  std::size_t n_classes_ = 0;
  std::size_t n_features_ = 0;
};

// Bagged CART trees: bootstrap resampling, ceil(sqrt(d)) random candidate
// features per node, Gini impurity weighted by the training-set class
// weights (the same N / (C * n_c) formula the models use).
inline RandomForest forest_fit(const Mat& x, const std::vector<int>& y, std::size_t n_classes,
                               const ForestConfig& cfg, std::uint64_t seed) {
  using namespace forest_detail;
  if (x.rows == 0 || x.rows != y.size()) throw ShapeError("feature/label size mismatch");
  if (cfg.n_trees == 0) throw SpecError("forest needs at least one tree");

  const std::vector<double> weights = class_weights(y, n_classes);
  const std::size_t n_candidates = static_cast<std::size_t>(
      std::ceil(std::sqrt(static_cast<double>(x.cols))));

  RandomForest forest;
  forest.n_classes_ = n_classes;
  forest.n_features_ = x.cols;

  for (std::size_t ti = 0; ti < cfg.n_trees; ++ti) {
    Rng rng(mix_seed(seed, ti));
    std::vector<std::size_t> sample(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) sample[i] = rng.bounded(x.rows);

    Tree tree;
    // Recursive build with an explicit stack of (node index, sample rows).
    struct Job {
      std::size_t node;
      std::vector<std::size_t> rows;
      std::size_t depth;
    };
    tree.nodes.emplace_back();
    std::vector<Job> jobs{{0, std::move(sample), 0}};
    while (!jobs.empty()) {
      Job job = std::move(jobs.back());
      jobs.pop_back();

      std::vector<double> class_sums(n_classes, 0.0);
      for (std::size_t r : job.rows) class_sums[static_cast<std::size_t>(y[r])] += weights[y[r]];
      double total = 0.0;
      for (double w : class_sums) total += w;
      TreeNode& node = tree.nodes[job.node];
      node.label = weighted_majority(class_sums);

      const bool depth_ok = (cfg.max_depth == 0) || (job.depth < cfg.max_depth);
      if (!depth_ok || job.rows.size() < cfg.min_samples || gini(class_sums, total) <= 0.0) {
        continue;  // stays a leaf
      }

      // Candidate features: distinct random draw without replacement.
      std::vector<std::size_t> features(x.cols);
      for (std::size_t f = 0; f < x.cols; ++f) features[f] = f;
      rng.shuffle(features);
      features.resize(std::min(n_candidates, features.size()));
      std::sort(features.begin(), features.end());  // deterministic evaluation order

      SplitChoice best;
      for (std::size_t f : features) {
        std::vector<std::pair<double, int>> values;
        values.reserve(job.rows.size());
        for (std::size_t r : job.rows) values.emplace_back(x.at(r, f), y[r]);
        std::sort(values.begin(), values.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });

        std::vector<double> left_sums(n_classes, 0.0);
        std::vector<double> right_sums = class_sums;
        double left_total = 0.0, right_total = total;
        for (std::size_t i = 0; i + 1 < values.size(); ++i) {
          const double w = weights[values[i].second];
          left_sums[static_cast<std::size_t>(values[i].second)] += w;
          right_sums[static_cast<std::size_t>(values[i].second)] -= w;
          left_total += w;
          right_total -= w;
          if (values[i].first == values[i + 1].first) continue;  // no boundary here
          const double score = (left_total * gini(left_sums, left_total) +
                                right_total * gini(right_sums, right_total)) /
                               total;
          if (!best.found || score < best.score) {
            best.found = true;
            best.feature = f;
            best.threshold = (values[i].first + values[i + 1].first) / 2.0;
            best.score = score;
          }
        }
      }
      if (!best.found) continue;  // all candidate features constant

      std::vector<std::size_t> left_rows, right_rows;
      for (std::size_t r : job.rows) {
        (x.at(r, best.feature) <= best.threshold ? left_rows : right_rows).push_back(r);
      }
      const std::size_t left_index = tree.nodes.size();
      tree.nodes.emplace_back();
      const std::size_t right_index = tree.nodes.size();
      tree.nodes.emplace_back();
      TreeNode& split_node = tree.nodes[job.node];
      split_node.leaf = false;
      split_node.feature = best.feature;
      split_node.threshold = best.threshold;
      split_node.left = left_index;
      split_node.right = right_index;
      jobs.push_back({right_index, std::move(right_rows), job.depth + 1});
      jobs.push_back({left_index, std::move(left_rows), job.depth + 1});
    }
    forest.trees_.push_back(std::move(tree));
  }
  return forest;
}

}  // namespace diagraph
