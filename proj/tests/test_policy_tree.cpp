#include <gtest/gtest.h>

#include "af/policy_tree.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace af;

namespace {

Matrix<double> random_matrix(Rng& rng, std::size_t n, std::size_t c, bool coarse) {
  Matrix<double> m(n, c);
  for (auto& v : m.data()) v = coarse ? static_cast<double>(rng.below(4)) : rng.uniform();
  return m;
}

// Fit-time leaf sizes of `tree` on rows of x.
std::vector<std::size_t> leaf_sizes(const PolicyTree& tree, const Matrix<double>& x) {
  std::vector<std::size_t> sizes(tree.nodes.size(), 0);
  for (std::size_t i = 0; i < x.rows(); ++i) ++sizes[tree.leaf_of(x.row(i))];
  std::vector<std::size_t> out;
  for (auto l : tree.leaves()) out.push_back(sizes[l]);
  return out;
}

}  // namespace

TEST(FitPolicyTree, DepthZeroPicksBestColumn) {
  Rng rng(1);
  const Matrix<double> x = random_matrix(rng, 6, 2, false);
  Matrix<double> r(6, 3, 0.0);
  for (std::size_t i = 0; i < 6; ++i) r(i, 0) = 0.5, r(i, 1) = 0.2, r(i, 2) = i == 0 ? 2.5 : 0.0;
  const PolicyTree t = fit_policy_tree(x, r, {.depth_limit = 0, .min_leaf = 1});
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_EQ(t.nodes[0].treatment, 0u);  // column sums 3.0, 1.2, 2.5
}

TEST(FitPolicyTree, FourInstancesSplitAtHalf) {
  const Matrix<double> x = test::matrix({{0.0}, {0.2}, {0.8}, {1.0}});
  const Matrix<double> r = test::matrix({{1, 0}, {1, 0}, {0, 1}, {0, 1}});
  const PolicyTree t = fit_policy_tree(x, r, {.depth_limit = 1, .min_leaf = 1});
  ASSERT_EQ(t.num_splits(), 1u);
  EXPECT_EQ(t.nodes[0].feature, 0);
  EXPECT_DOUBLE_EQ(t.nodes[0].threshold, 0.5);
  EXPECT_DOUBLE_EQ(objective(t, x, r), oracle::depth1_policy_optimum(x, r, 1, 0.0));
  EXPECT_DOUBLE_EQ(objective(t, x, r), 4.0);
  EXPECT_EQ(t.route(std::vector<double>{0.0}), 0u);
  EXPECT_EQ(t.route(std::vector<double>{1.0}), 1u);
  EXPECT_EQ(t.route(std::vector<double>{1.0}), t.route(std::vector<double>{1.0}));
}

TEST(FitPolicyTree, DominantPenaltyCollapsesTree) {
  const Matrix<double> x = test::matrix({{0.0}, {0.2}, {0.8}, {1.0}});
  const Matrix<double> r = test::matrix({{1, 0}, {1, 0}, {0, 1}, {0, 1}});
  const PolicyTree t = fit_policy_tree(x, r, {.depth_limit = 3, .min_leaf = 1, .split_penalty = -(2.0 + 1.0)});
  EXPECT_EQ(t.num_splits(), 0u);
}

TEST(Objective, DepthZeroAndPenaltyAccounting) {
  const Matrix<double> x = test::matrix({{0.0}, {1.0}});
  const Matrix<double> r = test::matrix({{1.0, 2.0}, {2.0, 3.0}});
  PolicyTree leaf;
  leaf.nodes = {PolicyNode{.treatment = 1}};
  EXPECT_DOUBLE_EQ(objective(leaf, x, r), 5.0);
  PolicyTree split;
  split.options.split_penalty = -0.1;
  split.nodes = {PolicyNode{.feature = 0, .threshold = 0.5, .left = 1, .right = 2}, PolicyNode{.treatment = 1},
                 PolicyNode{.treatment = 1}};
  EXPECT_NEAR(objective(split, x, r), 4.9, 1e-12);
}

TEST(FitPolicyTree, Errors) {
  const Matrix<double> x = test::matrix({{0.0}, {1.0}});
  const Matrix<double> r = test::matrix({{1.0}, {2.0}});
  EXPECT_THROW(fit_policy_tree(x, r, {.min_leaf = 3}), Error);
  EXPECT_THROW(fit_policy_tree(x, Matrix<double>(2, 0), {.min_leaf = 1}), std::invalid_argument);
  EXPECT_THROW(fit_policy_tree(x, test::matrix({{1.0}}), {.min_leaf = 1}), std::invalid_argument);
  EXPECT_THROW(fit_policy_tree(x, r, {.min_leaf = 1, .split_penalty = 0.5}), std::invalid_argument);
}

TEST(PolicyFeatures, ColumnCounts) {
  Rng rng(2);
  const Matrix<double> x = random_matrix(rng, 5, 3, false);
  ProbaTensor f(2, 4, 2);
  const IndexList rows{3, 1};
  EXPECT_EQ(build_policy_features(x, rows, f, FeatureMode::x_only).cols(), 3u);
  const auto full = build_policy_features(x, rows, f, FeatureMode::x_plus_preds);
  EXPECT_EQ(full.cols(), 3u + 8u);
  EXPECT_EQ(full(0, 2), x(3, 2));
}

TEST(FitPolicyTreeProperty, MatchesDepthOneOracleAtMicroScale) {
  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(8), w = 1 + rng.below(3);
    const Matrix<double> x = random_matrix(rng, n, 1 + rng.below(3), trial % 2 == 0);
    const Matrix<double> r = random_matrix(rng, n, w, trial % 3 == 0);
    const std::size_t min_leaf = 1 + rng.below(std::max<std::size_t>(n / 2, 1));
    const double penalty = trial % 4 == 0 ? -rng.uniform() : 0.0;
    const PolicyTree t = fit_policy_tree(x, r, {.depth_limit = 1, .min_leaf = min_leaf, .split_penalty = penalty});
    EXPECT_NEAR(objective(t, x, r), oracle::depth1_policy_optimum(x, r, min_leaf, penalty), 1e-9) << "trial " << trial;
  }
}

TEST(FitPolicyTreeProperty, InvariantsMonotoneTraceAndScaleInvariance) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 20 + rng.below(60);
    const Matrix<double> x = random_matrix(rng, n, 1 + rng.below(4), trial % 2 == 0);
    const Matrix<double> r = random_matrix(rng, n, 1 + rng.below(5), false);
    const PolicyTreeOptions opts{.depth_limit = 1 + rng.below(4), .min_leaf = 1 + rng.below(6),
                                 .split_penalty = trial % 3 == 0 ? -0.3 : 0.0};
    std::vector<double> trace;
    const PolicyTree t = fit_policy_tree(x, r, opts, &trace);
    ASSERT_FALSE(trace.empty());
    for (std::size_t s = 1; s < trace.size(); ++s) EXPECT_GE(trace[s], trace[s - 1]);
    EXPECT_NEAR(trace.back(), objective(t, x, r), 1e-9 * std::max(1.0, std::abs(trace.back())));
    EXPECT_LE(t.depth(), opts.depth_limit);
    for (auto size : leaf_sizes(t, x)) EXPECT_GE(size, opts.min_leaf);
    for (auto l : t.leaves()) EXPECT_LT(t.nodes[l].treatment, r.cols());

    PolicyTree root;
    root.options = opts;
    root.nodes = {PolicyNode{.treatment = 0}};
    double best_root = -kInf;
    for (std::size_t c = 0; c < r.cols(); ++c) {
      root.nodes[0].treatment = c;
      best_root = std::max(best_root, objective(root, x, r));
    }
    EXPECT_GE(objective(t, x, r), best_root - 1e-12);

    Matrix<double> scaled = r;
    for (auto& v : scaled.data()) v *= 4.0;
    PolicyTreeOptions scaled_opts = opts;
    scaled_opts.split_penalty *= 4.0;
    EXPECT_TRUE(fit_policy_tree(x, scaled, scaled_opts).same_structure(t)) << "trial " << trial;
  }
}
