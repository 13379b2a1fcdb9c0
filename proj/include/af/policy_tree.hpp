#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "af/cart.hpp"
#include "af/core.hpp"

namespace af {

struct PolicyNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::size_t left = 0;
  std::size_t right = 0;
  std::size_t treatment = 0;  // index into the candidate pool; leaves only

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const PolicyNode&, const PolicyNode&) = default;
};

struct PolicyTreeOptions {
  std::size_t depth_limit = 5;
  std::size_t min_leaf = 10;    // c_min
  double split_penalty = 0.0;   // lambda, must be <= 0

  friend bool operator==(const PolicyTreeOptions&, const PolicyTreeOptions&) = default;
};

/// Routing tree mapping a policy-feature row to a treatment (a column of the
/// reward matrix). Rows go left iff x[feature] < threshold.
class PolicyTree {
 public:
  std::vector<PolicyNode> nodes;  // nodes[0] is the root
  PolicyTreeOptions options;

  std::size_t leaf_of(std::span<const double> x) const {
    std::size_t id = 0;
    while (!nodes[id].is_leaf())
      id = x[static_cast<std::size_t>(nodes[id].feature)] < nodes[id].threshold ? nodes[id].left : nodes[id].right;
    return id;
  }

  std::size_t route(std::span<const double> x) const { return nodes[leaf_of(x)].treatment; }

  std::size_t num_splits() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const PolicyNode& n) { return !n.is_leaf(); }));
  }

  std::size_t depth() const { return depth_from(0); }

  std::vector<std::size_t> leaves() const {
    std::vector<std::size_t> out;
    for (std::size_t id = 0; id < nodes.size(); ++id)
      if (nodes[id].is_leaf()) out.push_back(id);
    return out;
  }

  /// Distinct leaf treatments in ascending order.
  std::vector<std::size_t> used_treatments() const {
    std::vector<std::size_t> out;
    for (const auto& n : nodes)
      if (n.is_leaf()) out.push_back(n.treatment);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// Same splits and same treatments.
  bool same_structure(const PolicyTree& other) const { return nodes == other.nodes; }

 private:
  std::size_t depth_from(std::size_t id) const {
    if (nodes[id].is_leaf()) return 0;
    return 1 + std::max(depth_from(nodes[id].left), depth_from(nodes[id].right));
  }
};

/// Policy inputs: the raw features alone, or the features followed by every
/// base learner's class probabilities (p + m*K columns).
enum class FeatureMode { x_only, x_plus_preds };

inline Matrix<double> build_policy_features(const Matrix<double>& x, std::span<const std::size_t> rows,
                                            const ProbaTensor& f, FeatureMode mode) {
  const std::size_t extra = mode == FeatureMode::x_plus_preds ? f.models() * f.classes() : 0;
  Matrix<double> out(rows.size(), x.cols() + extra);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto dst = out.row(r);
    const auto src = x.row(rows[r]);
    std::copy(src.begin(), src.end(), dst.begin());
    if (extra > 0) {
      const auto preds = f.instance(r);
      std::copy(preds.begin(), preds.end(), dst.begin() + static_cast<std::ptrdiff_t>(x.cols()));
    }
  }
  return out;
}

/// Sum of routed rewards plus lambda times the number of splits.
inline double objective(const PolicyTree& tree, const Matrix<double>& x, const Matrix<double>& rewards) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) total += rewards(i, tree.route(x.row(i)));
  return total + tree.options.split_penalty * static_cast<double>(tree.num_splits());
}

namespace detail {

class PolicyTreeFitter {
 public:
  PolicyTreeFitter(const Matrix<double>& x, const Matrix<double>& rewards, const PolicyTreeOptions& options)
      : x_(x), r_(rewards), opt_(options), n_(x.rows()), t_(rewards.cols()) {
    order_.resize(x_.cols());
    for (std::size_t f = 0; f < x_.cols(); ++f) {
      auto& o = order_[f];
      o.resize(n_);
      std::iota(o.begin(), o.end(), 0u);
      std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) { return x_(a, f) < x_(b, f); });
    }
    mark_.assign(n_, 0);
  }

  PolicyTree fit(std::vector<double>* trace) {
    std::vector<std::uint32_t> all(n_);
    std::iota(all.begin(), all.end(), 0u);
    root_ = grow(all, 0);
    if (trace) trace->push_back(subtree_value(*root_, all));
    local_search(trace);
    PolicyTree tree;
    tree.options = opt_;
    flatten(*root_, tree);
    return tree;
  }

 private:
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    std::size_t treatment = 0;
    std::unique_ptr<Node> left, right;
    bool is_leaf() const { return feature < 0; }
  };
  using Rows = std::vector<std::uint32_t>;

  struct SplitChoice {
    std::size_t feature = 0;
    double threshold = 0.0;
    double value = -kInf;
  };

  std::vector<double> reward_sums(const Rows& rows) const {
    std::vector<double> s(t_, 0.0);
    for (auto i : rows) {
      const auto row = r_.row(i);
      for (std::size_t t = 0; t < t_; ++t) s[t] += row[t];
    }
    return s;
  }

  static double max_entry(std::span<const double> v, std::size_t* at = nullptr) {
    const std::size_t k = argmax(v);
    if (at) *at = k;
    return v[k];
  }

  void mark(const Rows& rows, std::uint8_t value) {
    for (auto i : rows) mark_[i] = value;
  }

  // Rows of the node sorted by feature f, via the global presorted order.
  Rows sorted_rows(const Rows& rows, std::size_t f) {
    mark(rows, 1);
    Rows out;
    out.reserve(rows.size());
    for (auto i : order_[f])
      if (mark_[i]) out.push_back(i);
    mark(rows, 0);
    return out;
  }

  static double midpoint(double a, double b) {
    const double m = 0.5 * (a + b);
    return m > a ? m : b;
  }

  // Best split by the sum of per-side best-treatment totals.
  SplitChoice best_split(const Rows& rows, const std::vector<double>& totals) {
    SplitChoice best;
    std::vector<double> left(t_), right(t_);
    const std::size_t c_min = opt_.min_leaf;
    for (std::size_t f = 0; f < x_.cols(); ++f) {
      const Rows sorted = sorted_rows(rows, f);
      std::fill(left.begin(), left.end(), 0.0);
      for (std::size_t pos = 0; pos + 1 < sorted.size(); ++pos) {
        const auto row = r_.row(sorted[pos]);
        for (std::size_t t = 0; t < t_; ++t) left[t] += row[t];
        const std::size_t n_left = pos + 1;
        if (n_left < c_min || sorted.size() - n_left < c_min) continue;
        const double a = x_(sorted[pos], f);
        const double b = x_(sorted[pos + 1], f);
        if (!(a < b)) continue;
        for (std::size_t t = 0; t < t_; ++t) right[t] = totals[t] - left[t];
        const double value = max_entry(left) + max_entry(right);
        if (value > best.value) best = {f, midpoint(a, b), value};
      }
    }
    return best;
  }

  std::unique_ptr<Node> grow(const Rows& rows, std::size_t depth) {
    auto node = std::make_unique<Node>();
    const auto totals = reward_sums(rows);
    const double leaf_value = max_entry(totals, &node->treatment);
    if (depth >= opt_.depth_limit || rows.size() < 2 * opt_.min_leaf) return node;
    const SplitChoice split = best_split(rows, totals);
    if (!(split.value > -kInf) || !(split.value - leaf_value + opt_.split_penalty > 0.0)) return node;
    Rows l, r;
    for (auto i : rows) (x_(i, split.feature) < split.threshold ? l : r).push_back(i);
    node->feature = static_cast<int>(split.feature);
    node->threshold = split.threshold;
    node->left = grow(l, depth + 1);
    node->right = grow(r, depth + 1);
    return node;
  }

  const Node& leaf_for(const Node& node, std::uint32_t i) const {
    const Node* cur = &node;
    while (!cur->is_leaf()) cur = x_(i, static_cast<std::size_t>(cur->feature)) < cur->threshold ? cur->left.get() : cur->right.get();
    return *cur;
  }

  static std::size_t splits(const Node& node) {
    return node.is_leaf() ? 0 : 1 + splits(*node.left) + splits(*node.right);
  }

  static std::size_t depth_of(const Node& node) {
    return node.is_leaf() ? 0 : 1 + std::max(depth_of(*node.left), depth_of(*node.right));
  }

  double subtree_value(const Node& node, const Rows& rows) const {
    double total = 0.0;
    for (auto i : rows) total += r_(i, leaf_for(node, i).treatment);
    return total + opt_.split_penalty * static_cast<double>(splits(node));
  }

  static void collect_leaves(Node& node, std::vector<Node*>& out) {
    if (node.is_leaf()) {
      out.push_back(&node);
      return;
    }
    collect_leaves(*node.left, out);
    collect_leaves(*node.right, out);
  }

  // Leaf index (in collect_leaves order) for each row.
  std::vector<std::size_t> leaf_assignment(Node& node, const Rows& rows, std::vector<Node*>& leaves) const {
    leaves.clear();
    collect_leaves(node, leaves);
    std::vector<std::size_t> at(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const Node* leaf = &leaf_for(node, rows[r]);
      at[r] = static_cast<std::size_t>(std::find(leaves.begin(), leaves.end(), leaf) - leaves.begin());
    }
    return at;
  }

  // Re-picks every leaf's treatment for `rows`; false if some leaf would hold
  // fewer than c_min rows.
  bool refit_treatments(Node& node, const Rows& rows, bool check_only = false) {
    std::vector<Node*> leaves;
    const auto at = leaf_assignment(node, rows, leaves);
    std::vector<std::size_t> counts(leaves.size(), 0);
    Matrix<double> sums(leaves.size(), t_, 0.0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      ++counts[at[r]];
      const auto row = r_.row(rows[r]);
      auto dst = sums.row(at[r]);
      for (std::size_t t = 0; t < t_; ++t) dst[t] += row[t];
    }
    for (auto c : counts)
      if (c < opt_.min_leaf) return false;
    if (!check_only)
      for (std::size_t l = 0; l < leaves.size(); ++l) leaves[l]->treatment = argmax(sums.row(l));
    return true;
  }

  static std::unique_ptr<Node> clone(const Node& node) {
    auto out = std::make_unique<Node>();
    out->feature = node.feature;
    out->threshold = node.threshold;
    out->treatment = node.treatment;
    if (!node.is_leaf()) {
      out->left = clone(*node.left);
      out->right = clone(*node.right);
    }
    return out;
  }

  // Best (feature, threshold) for `node` keeping its current child subtrees
  // and their treatments; every child leaf must keep at least c_min rows.
  SplitChoice best_reparent_split(Node& node, const Rows& rows) {
    std::vector<Node*> left_leaves, right_leaves;
    const auto at_left = leaf_assignment(*node.left, rows, left_leaves);
    const auto at_right = leaf_assignment(*node.right, rows, right_leaves);
    std::vector<double> reward_left(n_), reward_right(n_);
    std::vector<std::size_t> leaf_left(n_), leaf_right(n_);
    double all_right = 0.0;
    std::vector<std::size_t> right_total(right_leaves.size(), 0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto i = rows[r];
      leaf_left[i] = at_left[r];
      leaf_right[i] = at_right[r];
      reward_left[i] = r_(i, left_leaves[at_left[r]]->treatment);
      reward_right[i] = r_(i, right_leaves[at_right[r]]->treatment);
      all_right += reward_right[i];
      ++right_total[at_right[r]];
    }
    const double penalty =
        opt_.split_penalty * static_cast<double>(1 + splits(*node.left) + splits(*node.right));
    const std::size_t c_min = opt_.min_leaf;

    SplitChoice best;
    for (std::size_t f = 0; f < x_.cols(); ++f) {
      const Rows sorted = sorted_rows(rows, f);
      std::vector<std::size_t> cnt_left(left_leaves.size(), 0);
      std::vector<std::size_t> cnt_right = right_total;
      std::size_t short_left = c_min > 0 ? left_leaves.size() : 0;
      std::size_t short_right = 0;
      for (auto c : cnt_right)
        if (c < c_min) ++short_right;
      double value = all_right;
      for (std::size_t pos = 0; pos + 1 < sorted.size(); ++pos) {
        const auto i = sorted[pos];
        value += reward_left[i] - reward_right[i];
        if (++cnt_left[leaf_left[i]] == c_min) --short_left;
        if (cnt_right[leaf_right[i]]-- == c_min) ++short_right;
        if (short_left > 0 || short_right > 0) continue;
        const double a = x_(i, f);
        const double b = x_(sorted[pos + 1], f);
        if (!(a < b)) continue;
        if (value + penalty > best.value) best = {f, midpoint(a, b), value + penalty};
      }
    }
    return best;
  }

  static double tolerance(double a, double b) { return 1e-10 * std::max(std::abs(a), std::abs(b)); }

  // One coordinate step at `slot`; returns true if the subtree was replaced.
  bool improve_node(std::unique_ptr<Node>& slot, const Rows& rows, std::size_t depth, double& total,
                    std::vector<double>* trace) {
    Node& node = *slot;
    const double current = subtree_value(node, rows);
    const auto totals = reward_sums(rows);
    std::unique_ptr<Node> best;
    double best_value = current;
    auto consider = [&](std::unique_ptr<Node> candidate, double value) {
      if (value > best_value + tolerance(value, best_value)) {
        best_value = value;
        best = std::move(candidate);
      }
    };

    if (node.is_leaf()) {
      if (depth < opt_.depth_limit && rows.size() >= 2 * opt_.min_leaf) {
        auto regrown = grow(rows, depth);
        const double v = subtree_value(*regrown, rows);
        consider(std::move(regrown), v);
      }
    } else {
      {
        auto leaf = std::make_unique<Node>();
        const double v = max_entry(totals, &leaf->treatment);
        consider(std::move(leaf), v);
      }
      for (const Node* child : {node.left.get(), node.right.get()}) {
        auto promoted = clone(*child);
        if (!refit_treatments(*promoted, rows)) continue;
        const double v = subtree_value(*promoted, rows);
        consider(std::move(promoted), v);
      }
      const SplitChoice split = best_reparent_split(node, rows);
      if (split.value > -kInf && (split.feature != static_cast<std::size_t>(node.feature) || split.threshold != node.threshold)) {
        auto moved = std::make_unique<Node>();
        moved->feature = static_cast<int>(split.feature);
        moved->threshold = split.threshold;
        moved->left = clone(*node.left);
        moved->right = clone(*node.right);
        if (refit_treatments(*moved, rows)) {
          const double v = subtree_value(*moved, rows);
          consider(std::move(moved), v);
        }
      }
    }
    if (!best) return false;
    slot = std::move(best);
    total += best_value - current;
    if (trace) trace->push_back(total);
    return true;
  }

  void local_search(std::vector<double>* trace) {
    Rows all(n_);
    std::iota(all.begin(), all.end(), 0u);
    double total = subtree_value(*root_, all);
    constexpr int kMaxPasses = 1000;
    for (int pass = 0; pass < kMaxPasses; ++pass) {
      bool changed = false;
      struct Item {
        std::unique_ptr<Node>* slot;
        Rows rows;
        std::size_t depth;
      };
      std::deque<Item> queue;
      queue.push_back({&root_, all, 0});
      while (!queue.empty()) {
        Item item = std::move(queue.front());
        queue.pop_front();
        if (improve_node(*item.slot, item.rows, item.depth, total, trace)) changed = true;
        Node& node = **item.slot;
        if (node.is_leaf()) continue;
        Rows l, r;
        for (auto i : item.rows) (x_(i, static_cast<std::size_t>(node.feature)) < node.threshold ? l : r).push_back(i);
        queue.push_back({&node.left, std::move(l), item.depth + 1});
        queue.push_back({&node.right, std::move(r), item.depth + 1});
      }
      if (!changed) break;
    }
  }

  // Breadth-first numbering so the root is node 0 and siblings are adjacent.
  void flatten(const Node& root, PolicyTree& tree) const {
    std::deque<std::pair<const Node*, std::size_t>> queue;
    tree.nodes.emplace_back();
    queue.emplace_back(&root, 0);
    while (!queue.empty()) {
      auto [node, id] = queue.front();
      queue.pop_front();
      auto& out = tree.nodes[id];
      out.feature = node->feature;
      out.threshold = node->is_leaf() ? 0.0 : node->threshold;
      out.treatment = node->is_leaf() ? node->treatment : 0;
      if (node->is_leaf()) continue;
      const std::size_t left_id = tree.nodes.size();
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      tree.nodes[id].left = left_id;
      tree.nodes[id].right = left_id + 1;
      queue.emplace_back(node->left.get(), left_id);
      queue.emplace_back(node->right.get(), left_id + 1);
    }
  }

  const Matrix<double>& x_;
  const Matrix<double>& r_;
  PolicyTreeOptions opt_;
  std::size_t n_;
  std::size_t t_;
  std::vector<std::vector<std::uint32_t>> order_;
  std::vector<std::uint8_t> mark_;
  std::unique_ptr<Node> root_;
};

}  // namespace detail

/// Fits a reward-maximising policy tree: greedy top-down growth followed by
/// breadth-first coordinate descent over nodes until a full pass changes
/// nothing. `trace`, when given, receives the objective after growth and
/// after every accepted move.
inline PolicyTree fit_policy_tree(const Matrix<double>& x, const Matrix<double>& rewards,
                                  const PolicyTreeOptions& options, std::vector<double>* trace = nullptr) {
  if (x.rows() != rewards.rows()) throw std::invalid_argument("fit_policy_tree: feature and reward rows differ");
  if (rewards.cols() == 0) throw std::invalid_argument("fit_policy_tree: reward matrix has no columns");
  if (options.split_penalty > 0.0) throw std::invalid_argument("fit_policy_tree: split penalty must be <= 0");
  if (options.min_leaf < 1) throw std::invalid_argument("fit_policy_tree: min_leaf must be at least 1");
  if (options.min_leaf > x.rows())
    throw Error("policy tree min_leaf " + std::to_string(options.min_leaf) + " exceeds the " +
                std::to_string(x.rows()) + " training rows");
  return detail::PolicyTreeFitter(x, rewards, options).fit(trace);
}

}  // namespace af
