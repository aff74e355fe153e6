#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "assure/rng.hpp"
#include "assure/statespace.hpp"

namespace assure {

// Decision-forest emission model: maps a perception feature vector to a
// distribution over cte states. Trees are grown on bootstrap subsamples with
// Gini-impurity splits over a random ceil(sqrt(d)) feature subset per node,
// which keeps the trees decorrelated.

struct ForestConfig {
  std::size_t trees = 280;
  std::size_t min_leaf = 10;
  std::size_t samples_per_tree = 100;
  std::uint64_t seed = 0;

  bool operator==(const ForestConfig&) const = default;
};

struct TrainingSample {
  FeatureVector features;
  std::size_t state = 0;
};

struct TreeNode {
  // Internal node: feature/threshold/left/right. Leaf: left == -1 and the
  // class-count histogram is non-empty.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<std::uint32_t> histogram;

  bool is_leaf() const { return left < 0; }
  bool operator==(const TreeNode&) const = default;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.empty()) throw std::invalid_argument("DecisionTree: no nodes");
  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }

  const std::vector<std::uint32_t>& leaf_counts(const FeatureVector& x) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
      const auto& n = nodes_[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.threshold
                                       ? n.left
                                       : n.right);
    }
    return nodes_[i].histogram;
  }

  std::size_t depth() const { return depth_from(0); }

  bool operator==(const DecisionTree&) const = default;

 private:
  std::size_t depth_from(std::size_t i) const {
    if (nodes_[i].is_leaf()) return 1;
    return 1 + std::max(depth_from(static_cast<std::size_t>(nodes_[i].left)),
                        depth_from(static_cast<std::size_t>(nodes_[i].right)));
  }

  std::vector<TreeNode> nodes_;
};

class EmissionForest {
 public:
  EmissionForest() = default;
  EmissionForest(std::vector<DecisionTree> trees, std::size_t num_states,
                 std::size_t feature_dim, ForestConfig config)
      : trees_(std::move(trees)),
        num_states_(num_states),
        feature_dim_(feature_dim),
        config_(config) {
    if (trees_.empty()) throw std::invalid_argument("EmissionForest: no trees");
    if (num_states_ < 2) throw std::invalid_argument("EmissionForest: need >= 2 states");
  }

  const std::vector<DecisionTree>& trees() const { return trees_; }
  std::size_t num_states() const { return num_states_; }
  std::size_t feature_dim() const { return feature_dim_; }
  const ForestConfig& config() const { return config_; }

  bool operator==(const EmissionForest&) const = default;

 private:
  std::vector<DecisionTree> trees_;
  std::size_t num_states_ = 0;
  std::size_t feature_dim_ = 0;
  ForestConfig config_;
};

namespace detail {

inline double gini(const std::vector<std::size_t>& counts, std::size_t n) {
  if (n == 0) return 0.0;
  double g = 1.0;
  for (std::size_t c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    g -= p * p;
  }
  return g;
}

struct TreeBuilder {
  const std::vector<TrainingSample>& samples;
  std::size_t num_states;
  std::size_t feature_dim;
  std::size_t min_leaf;
  std::mt19937_64& rng;
  std::vector<TreeNode> nodes;

  // indices: the in-bag sample rows owned by the node under construction.
  int build(std::vector<std::size_t>& indices) {
    std::vector<std::size_t> counts(num_states, 0);
    for (std::size_t i : indices) ++counts[samples[i].state];
    const std::size_t n = indices.size();
    const bool pure =
        std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_decrease = 0.0;
    if (!pure && n > min_leaf) {
      const double parent_gini = gini(counts, n);
      const auto m = static_cast<std::size_t>(
          std::ceil(std::sqrt(static_cast<double>(feature_dim))));
      std::vector<std::size_t> feats(feature_dim);
      std::iota(feats.begin(), feats.end(), 0);
      for (std::size_t i = 0; i < m; ++i) {  // partial Fisher-Yates
        std::uniform_int_distribution<std::size_t> pick(i, feature_dim - 1);
        std::swap(feats[i], feats[pick(rng)]);
      }
      std::vector<std::size_t> order = indices;
      std::vector<std::size_t> left_counts(num_states);
      for (std::size_t fi = 0; fi < m; ++fi) {
        const std::size_t f = feats[fi];
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return samples[a].features[f] < samples[b].features[f];
        });
        std::fill(left_counts.begin(), left_counts.end(), 0);
        for (std::size_t cut = 1; cut < n; ++cut) {
          ++left_counts[samples[order[cut - 1]].state];
          const double lo = samples[order[cut - 1]].features[f];
          const double hi = samples[order[cut]].features[f];
          if (!(lo < hi)) continue;  // no separating threshold here
          if (cut < min_leaf || n - cut < min_leaf) continue;
          std::size_t nl = cut;
          double gl = 1.0, gr = 1.0;
          {
            double sl = 0.0, sr = 0.0;
            for (std::size_t s = 0; s < num_states; ++s) {
              const double cl = static_cast<double>(left_counts[s]);
              const double cr = static_cast<double>(counts[s] - left_counts[s]);
              sl += cl * cl;
              sr += cr * cr;
            }
            gl = 1.0 - sl / (static_cast<double>(nl) * static_cast<double>(nl));
            gr = 1.0 - sr / (static_cast<double>(n - nl) * static_cast<double>(n - nl));
          }
          const double weighted = (static_cast<double>(nl) * gl +
                                   static_cast<double>(n - nl) * gr) /
                                  static_cast<double>(n);
          const double decrease = parent_gini - weighted;
          if (decrease > best_decrease + 1e-15) {
            best_decrease = decrease;
            best_feature = static_cast<int>(f);
            best_threshold = lo + 0.5 * (hi - lo);
          }
        }
      }
    }

    if (best_feature < 0) {
      TreeNode leaf;
      leaf.histogram.assign(counts.begin(), counts.end());
      nodes.push_back(std::move(leaf));
      return static_cast<int>(nodes.size() - 1);
    }

    std::vector<std::size_t> left_idx, right_idx;
    left_idx.reserve(n);
    right_idx.reserve(n);
    for (std::size_t i : indices) {
      (samples[i].features[static_cast<std::size_t>(best_feature)] < best_threshold ? left_idx
                                                                                    : right_idx)
          .push_back(i);
    }
    const std::size_t self = nodes.size();
    nodes.emplace_back();
    nodes[self].feature = best_feature;
    nodes[self].threshold = best_threshold;
    const int l = build(left_idx);
    const int r = build(right_idx);
    nodes[self].left = l;
    nodes[self].right = r;
    return static_cast<int>(self);
  }
};

}  // namespace detail

/// Grow the forest. Each tree draws `samples_per_tree` rows with replacement
/// from its own seed-derived stream, so training is reproducible and trees
/// could be fit concurrently without changing the result. `bags`, when given,
/// receives the in-bag row indices per tree (used for out-of-bag scoring).
inline EmissionForest fit_forest(const std::vector<TrainingSample>& samples,
                                 std::size_t num_states, const ForestConfig& config,
                                 std::vector<std::vector<std::size_t>>* bags = nullptr) {
  if (config.trees == 0 || config.min_leaf == 0 || config.samples_per_tree == 0) {
    throw std::invalid_argument("fit_forest: config counts must be positive");
  }
  if (samples.empty()) throw std::invalid_argument("fit_forest: no samples");
  const std::size_t d = samples[0].features.size();
  std::vector<bool> seen(num_states, false);
  for (const auto& s : samples) {
    if (s.state >= num_states) throw std::invalid_argument("fit_forest: state index out of range");
    if (s.features.size() != d) {
      throw std::invalid_argument("fit_forest: inconsistent feature dimension");
    }
    seen[s.state] = true;
  }
  if (std::count(seen.begin(), seen.end(), true) < 2) {
    throw std::invalid_argument("fit_forest: samples cover a single state");
  }

  if (bags != nullptr) {
    bags->assign(config.trees, {});
  }
  std::vector<DecisionTree> trees;
  trees.reserve(config.trees);
  for (std::size_t t = 0; t < config.trees; ++t) {
    auto rng = substream(config.seed, "forest.tree", t);
    std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
    std::vector<std::size_t> bag(config.samples_per_tree);
    for (auto& i : bag) i = pick(rng);
    if (bags != nullptr) (*bags)[t] = bag;
    detail::TreeBuilder builder{samples, num_states, d, config.min_leaf, rng, {}};
    builder.build(bag);
    trees.emplace_back(std::move(builder.nodes));
  }
  return EmissionForest(std::move(trees), num_states, d, config);
}

/// Average of Laplace-smoothed leaf histograms, (count+1)/(leafN+K).
/// Smoothing keeps every state strictly positive, so the emission can never
/// annihilate a prediction outright.
inline BeliefVector forest_predict(const EmissionForest& forest, const FeatureVector& features) {
  if (features.size() != forest.feature_dim()) {
    throw std::invalid_argument("forest_predict: feature dimension mismatch");
  }
  const std::size_t k = forest.num_states();
  std::vector<double> acc(k, 0.0);
  for (const auto& tree : forest.trees()) {
    const auto& hist = tree.leaf_counts(features);
    std::uint64_t n = 0;
    for (std::uint32_t c : hist) n += c;
    const double denom = static_cast<double>(n) + static_cast<double>(k);
    for (std::size_t s = 0; s < k; ++s) {
      acc[s] += (static_cast<double>(hist[s]) + 1.0) / denom;
    }
  }
  return BeliefVector::normalized(std::move(acc));
}

/// Resample with replacement so every observed class reaches the count of the
/// most common one. Balanced emission data is what justifies reading the
/// forest posterior directly as an evidence weight downstream.
inline std::vector<TrainingSample> stratified_balance(const std::vector<TrainingSample>& samples,
                                                      std::size_t num_states,
                                                      std::mt19937_64& rng) {
  std::vector<std::vector<std::size_t>> by_class(num_states);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].state >= num_states) {
      throw std::invalid_argument("stratified_balance: state index out of range");
    }
    by_class[samples[i].state].push_back(i);
  }
  std::size_t target = 0;
  for (const auto& v : by_class) target = std::max(target, v.size());
  if (target == 0) throw std::invalid_argument("stratified_balance: no samples");

  std::vector<TrainingSample> out;
  for (const auto& members : by_class) {
    if (members.empty()) continue;
    for (std::size_t i = 0; i < members.size(); ++i) out.push_back(samples[members[i]]);
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    for (std::size_t i = members.size(); i < target; ++i) {
      out.push_back(samples[members[pick(rng)]]);
    }
  }
  return out;
}

}  // namespace assure
