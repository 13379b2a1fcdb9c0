#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "af/core.hpp"
#include "af/dataset.hpp"

namespace af {

/// Internal nodes carry a split; leaves carry a class distribution.
struct CartNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::size_t left = 0;
  std::size_t right = 0;
  std::vector<double> distribution;

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const CartNode&, const CartNode&) = default;
};

/// Axis-aligned probability tree. Rows go left iff x[feature] < threshold.
class CartTree {
 public:
  std::vector<CartNode> nodes;  // nodes[0] is the root
  std::size_t num_classes = 0;
  std::size_t max_depth = 0;

  std::span<const double> predict_proba(std::span<const double> x) const {
    std::size_t id = 0;
    while (!nodes[id].is_leaf()) {
      const auto& node = nodes[id];
      id = x[static_cast<std::size_t>(node.feature)] < node.threshold ? node.left : node.right;
    }
    return nodes[id].distribution;
  }

  std::size_t depth() const { return depth_from(0); }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const CartNode& n) { return n.is_leaf(); }));
  }

  friend bool operator==(const CartTree&, const CartTree&) = default;

 private:
  std::size_t depth_from(std::size_t id) const {
    if (nodes[id].is_leaf()) return 0;
    return 1 + std::max(depth_from(nodes[id].left), depth_from(nodes[id].right));
  }
};

struct CartOptions {
  std::size_t max_depth = 10;
  std::size_t min_leaf = 1;
};

namespace detail {

// Greedy Gini CART grower. Each node keeps, per allowed feature, its rows
// sorted by that feature; children inherit the order by stable partition.
class CartGrower {
 public:
  CartGrower(const Matrix<double>& x, std::span<const std::size_t> labels, std::size_t num_classes,
             const CartOptions& options, std::span<const std::size_t> features)
      : x_(x), labels_(labels), k_(num_classes), options_(options), features_(features.begin(), features.end()) {}

  CartTree grow(std::span<const std::size_t> rows) {
    tree_.num_classes = k_;
    tree_.max_depth = options_.max_depth;
    std::vector<std::vector<std::uint32_t>> sorted(features_.size());
    for (std::size_t f = 0; f < features_.size(); ++f) {
      auto& order = sorted[f];
      order.assign(rows.begin(), rows.end());
      const std::size_t col = features_[f];
      std::stable_sort(order.begin(), order.end(),
                       [&](std::uint32_t a, std::uint32_t b) { return x_(a, col) < x_(b, col); });
    }
    in_left_.assign(x_.rows(), 0);
    tree_.nodes.emplace_back();
    build(0, std::vector<std::uint32_t>(rows.begin(), rows.end()), std::move(sorted), 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    std::size_t feature_slot = 0;
    double threshold = 0.0;
    double score = kInf;  // weighted Gini proxy, lower is better
  };

  void build(std::size_t id, std::vector<std::uint32_t> rows, std::vector<std::vector<std::uint32_t>> sorted,
             std::size_t depth) {
    std::vector<double> counts(k_, 0.0);
    for (auto r : rows) counts[labels_[r]] += 1.0;
    const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }) <= 1;

    std::optional<Split> split;
    if (!pure && depth < options_.max_depth && rows.size() >= 2 * options_.min_leaf)
      split = best_split(sorted, counts, rows.size());

    if (!split) {
      auto& leaf = tree_.nodes[id];
      leaf.distribution = counts;
      for (auto& v : leaf.distribution) v /= static_cast<double>(rows.size());
      return;
    }

    const std::size_t col = features_[split->feature_slot];
    std::vector<std::uint32_t> left_rows, right_rows;
    for (auto r : rows) {
      const bool left = x_(r, col) < split->threshold;
      in_left_[r] = left ? 1 : 0;
      (left ? left_rows : right_rows).push_back(r);
    }
    std::vector<std::vector<std::uint32_t>> left_sorted(sorted.size()), right_sorted(sorted.size());
    for (std::size_t f = 0; f < sorted.size(); ++f) {
      left_sorted[f].reserve(left_rows.size());
      right_sorted[f].reserve(right_rows.size());
      for (auto r : sorted[f]) (in_left_[r] ? left_sorted[f] : right_sorted[f]).push_back(r);
    }
    sorted.clear();
    sorted.shrink_to_fit();

    const std::size_t left_id = tree_.nodes.size();
    tree_.nodes.emplace_back();
    const std::size_t right_id = tree_.nodes.size();
    tree_.nodes.emplace_back();
    {
      auto& node = tree_.nodes[id];
      node.feature = static_cast<int>(col);
      node.threshold = split->threshold;
      node.left = left_id;
      node.right = right_id;
    }
    build(left_id, std::move(left_rows), std::move(left_sorted), depth + 1);
    build(right_id, std::move(right_rows), std::move(right_sorted), depth + 1);
  }

  std::optional<Split> best_split(const std::vector<std::vector<std::uint32_t>>& sorted,
                                  const std::vector<double>& total, std::size_t n) const {
    std::optional<Split> best;
    std::vector<double> left(k_);
    const std::size_t min_leaf = std::max<std::size_t>(1, options_.min_leaf);
    // Features are scanned in ascending column order so that ties keep the
    // lowest feature index, then the lowest threshold.
    std::vector<std::size_t> slots(features_.size());
    for (std::size_t s = 0; s < slots.size(); ++s) slots[s] = s;
    std::sort(slots.begin(), slots.end(), [&](std::size_t a, std::size_t b) { return features_[a] < features_[b]; });

    double total_sq = 0.0;
    for (double c : total) total_sq += c * c;

    for (std::size_t slot : slots) {
      const auto& order = sorted[slot];
      const std::size_t col = features_[slot];
      std::fill(left.begin(), left.end(), 0.0);
      double left_sq = 0.0;
      double right_sq = total_sq;
      for (std::size_t pos = 0; pos + 1 < n; ++pos) {
        const std::size_t y = labels_[order[pos]];
        const double cl = left[y];
        const double cr = total[y] - cl;
        left_sq += 2.0 * cl + 1.0;
        right_sq -= 2.0 * cr - 1.0;
        left[y] += 1.0;
        const std::size_t n_left = pos + 1;
        const std::size_t n_right = n - n_left;
        if (n_left < min_leaf || n_right < min_leaf) continue;
        const double a = x_(order[pos], col);
        const double b = x_(order[pos + 1], col);
        if (!(a < b)) continue;
        const double score = (static_cast<double>(n_left) - left_sq / static_cast<double>(n_left)) +
                             (static_cast<double>(n_right) - right_sq / static_cast<double>(n_right));
        if (!best || score < best->score) {
          double threshold = 0.5 * (a + b);
          if (!(threshold > a)) threshold = b;
          best = Split{slot, threshold, score};
        }
      }
    }
    return best;
  }

  const Matrix<double>& x_;
  std::span<const std::size_t> labels_;
  std::size_t k_;
  CartOptions options_;
  std::vector<std::size_t> features_;
  std::vector<std::uint8_t> in_left_;
  CartTree tree_;
};

}  // namespace detail

/// Greedy Gini CART on `rows`, restricted to `allowed_features`. Candidate
/// thresholds are midpoints between consecutive distinct values.
inline CartTree fit_cart(const Matrix<double>& x, std::span<const std::size_t> labels, std::size_t num_classes,
                         std::span<const std::size_t> rows, const CartOptions& options,
                         std::span<const std::size_t> allowed_features) {
  if (rows.empty()) throw std::invalid_argument("fit_cart: empty index set");
  if (options.min_leaf < 1) throw std::invalid_argument("fit_cart: min_leaf must be at least 1");
  if (num_classes == 0) throw std::invalid_argument("fit_cart: no classes");
  for (auto f : allowed_features)
    if (f >= x.cols()) throw std::invalid_argument("fit_cart: feature index out of range");
  return detail::CartGrower(x, labels, num_classes, options, allowed_features).grow(rows);
}

inline CartTree fit_cart(const Dataset& ds, std::span<const std::size_t> rows, const CartOptions& options) {
  IndexList all(ds.p());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
  return fit_cart(ds.features, ds.labels, ds.num_classes, rows, options, all);
}

/// Bagging knobs. The ratio overrides exist for tests that need the
/// deterministic no-sampling case.
struct BaggingOptions {
  std::size_t num_trees = 50;
  CartOptions cart;
  double min_ratio = 0.5;
  double max_ratio = 0.9;
  std::optional<double> fixed_instance_ratio;
  std::optional<double> fixed_feature_ratio;
};

struct BaggedEnsemble {
  std::vector<CartTree> trees;
  std::vector<IndexList> feature_subsets;
  std::vector<IndexList> in_bag;  // dataset row ids, sorted
  std::vector<IndexList> oob;     // training rows not in the bag, sorted
  IndexList training_rows;
  std::size_t num_classes = 0;
  std::size_t num_features = 0;

  std::size_t size() const { return trees.size(); }
};

/// Fits `num_trees` CARTs, each on a random subset of the training rows and of
/// the features. Both ratios are drawn uniformly from [min_ratio, max_ratio]
/// per tree; sampling is without replacement. Tree j uses a seed derived from
/// (seed, j), so the result does not depend on fitting order.
inline BaggedEnsemble fit_bagged(const Dataset& ds, std::span<const std::size_t> rows, const BaggingOptions& options,
                                 std::uint64_t seed) {
  if (options.num_trees < 1) throw std::invalid_argument("fit_bagged: need at least one tree");
  if (rows.size() < 2) throw Error("fit_bagged: need at least 2 training rows, got " + std::to_string(rows.size()));
  BaggedEnsemble ens;
  ens.num_classes = ds.num_classes;
  ens.num_features = ds.p();
  ens.training_rows.assign(rows.begin(), rows.end());
  std::sort(ens.training_rows.begin(), ens.training_rows.end());
  const std::size_t n = ens.training_rows.size();
  const std::size_t p = ds.p();

  auto count_for = [](double ratio, std::size_t total) {
    const auto c = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(total)));
    return std::clamp<std::size_t>(c, 1, total);
  };

  for (std::size_t j = 0; j < options.num_trees; ++j) {
    Rng rng(derive_seed(seed, j));
    const double inst_ratio = options.fixed_instance_ratio.value_or(rng.uniform(options.min_ratio, options.max_ratio));
    const double feat_ratio = options.fixed_feature_ratio.value_or(rng.uniform(options.min_ratio, options.max_ratio));
    const auto picked = rng.sample_without_replacement(n, count_for(inst_ratio, n));
    const auto features = rng.sample_without_replacement(p, count_for(feat_ratio, p));

    IndexList bag, out;
    std::size_t next = 0;
    for (std::size_t pos = 0; pos < n; ++pos) {
      if (next < picked.size() && picked[next] == pos) {
        bag.push_back(ens.training_rows[pos]);
        ++next;
      } else {
        out.push_back(ens.training_rows[pos]);
      }
    }
    ens.trees.push_back(fit_cart(ds.features, ds.labels, ds.num_classes, bag, options.cart, features));
    ens.feature_subsets.push_back(features);
    ens.in_bag.push_back(std::move(bag));
    ens.oob.push_back(std::move(out));
  }
  return ens;
}

/// f[i][j][k]: probability that tree j assigns class k to row i.
class ProbaTensor {
 public:
  ProbaTensor() = default;
  ProbaTensor(std::size_t n, std::size_t m, std::size_t k) : n_(n), m_(m), k_(k), data_(n * m * k, 0.0) {}

  std::size_t instances() const { return n_; }
  std::size_t models() const { return m_; }
  std::size_t classes() const { return k_; }

  double& operator()(std::size_t i, std::size_t j, std::size_t k) { return data_[(i * m_ + j) * k_ + k]; }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const { return data_[(i * m_ + j) * k_ + k]; }

  /// All m*K entries for instance i, model-major.
  std::span<const double> instance(std::size_t i) const { return {data_.data() + i * m_ * k_, m_ * k_}; }
  std::span<double> instance(std::size_t i) { return {data_.data() + i * m_ * k_, m_ * k_}; }
  std::span<const double> distribution(std::size_t i, std::size_t j) const {
    return {data_.data() + (i * m_ + j) * k_, k_};
  }

  /// Rows `positions` (indices into this tensor) as a new tensor.
  ProbaTensor select(std::span<const std::size_t> positions) const {
    ProbaTensor out(positions.size(), m_, k_);
    for (std::size_t r = 0; r < positions.size(); ++r) {
      const auto src = instance(positions[r]);
      std::copy(src.begin(), src.end(), out.instance(r).begin());
    }
    return out;
  }

  /// The first `m` models only.
  ProbaTensor first_models(std::size_t m) const {
    ProbaTensor out(n_, m, k_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = 0; k < k_; ++k) out(i, j, k) = (*this)(i, j, k);
    return out;
  }

 private:
  std::size_t n_ = 0, m_ = 0, k_ = 0;
  std::vector<double> data_;
};

/// Writes every tree's distribution for row x into `out` (m*K entries).
inline void predict_all(const BaggedEnsemble& ens, std::span<const double> x, std::span<double> out) {
  const std::size_t k = ens.num_classes;
  for (std::size_t j = 0; j < ens.size(); ++j) {
    const auto dist = ens.trees[j].predict_proba(x);
    std::copy(dist.begin(), dist.end(), out.begin() + static_cast<std::ptrdiff_t>(j * k));
  }
}

inline ProbaTensor proba_tensor(const BaggedEnsemble& ens, const Matrix<double>& x, std::span<const std::size_t> rows) {
  ProbaTensor f(rows.size(), ens.size(), ens.num_classes);
  for (std::size_t r = 0; r < rows.size(); ++r) predict_all(ens, x.row(rows[r]), f.instance(r));
  return f;
}

}  // namespace af
