#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "af/cart.hpp"
#include "test_util.hpp"

using namespace af;

namespace {

IndexList all_rows(const Dataset& ds) {
  IndexList r(ds.n());
  std::iota(r.begin(), r.end(), 0);
  return r;
}

std::size_t correct(const CartTree& t, const Dataset& ds) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.n(); ++i) hits += argmax(t.predict_proba(ds.features.row(i))) == ds.labels[i];
  return hits;
}

// Best number of correctly classified rows over every axis tree of depth <= d,
// found by recursion over every (feature, midpoint) split.
std::size_t oracle_best(const Dataset& ds, const IndexList& rows, std::size_t depth) {
  std::vector<std::size_t> counts(ds.num_classes, 0);
  for (auto i : rows) ++counts[ds.labels[i]];
  std::size_t best = rows.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
  if (depth == 0) return best;
  for (std::size_t f = 0; f < ds.p(); ++f) {
    std::set<double> values;
    for (auto i : rows) values.insert(ds.features(i, f));
    for (auto it = values.begin(); std::next(it) != values.end(); ++it) {
      const double thr = (*it + *std::next(it)) / 2.0;
      IndexList l, r;
      for (auto i : rows) (ds.features(i, f) < thr ? l : r).push_back(i);
      best = std::max(best, oracle_best(ds, l, depth - 1) + oracle_best(ds, r, depth - 1));
    }
  }
  return best;
}

void expect_probability_vector(std::span<const double> p) {
  double s = 0.0;
  for (double v : p) {
    EXPECT_GE(v, 0.0);
    s += v;
  }
  EXPECT_NEAR(s, 1.0, 1e-9);
}

}  // namespace

TEST(FitCart, SingleInstanceIsPureLeaf) {
  const Dataset ds = make_dataset(test::matrix({{3.0}}), {0}, 2);
  const CartTree t = fit_cart(ds, IndexList{0}, {});
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_EQ(t.nodes[0].distribution, (std::vector<double>{1.0, 0.0}));
  const std::vector<double> x{-100.0};
  EXPECT_EQ(std::vector<double>(t.predict_proba(x).begin(), t.predict_proba(x).end()),
            (std::vector<double>{1.0, 0.0}));
}

TEST(FitCart, PerfectSplitAtMidpoint) {
  const Dataset ds = make_dataset(test::matrix({{0.0}, {1.0}}), {0, 1});
  const CartTree t = fit_cart(ds, IndexList{0, 1}, {.max_depth = 1});
  ASSERT_EQ(t.nodes.size(), 3u);
  EXPECT_EQ(t.nodes[0].feature, 0);
  EXPECT_DOUBLE_EQ(t.nodes[0].threshold, 0.5);
  EXPECT_EQ(t.nodes[t.nodes[0].left].distribution, (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(t.nodes[t.nodes[0].right].distribution, (std::vector<double>{0.0, 1.0}));
  const std::vector<double> x{0.0};
  EXPECT_DOUBLE_EQ(t.predict_proba(x)[0], 1.0);
}

// The Gini-best root (x0 < 1.5, weighted impurity 0.1875 against 0.4375 for
// x1) leaves one mixed cell, while rooting on x1 separates all eight points.
TEST(FitCart, GreedyDepthTwoFallsShortOfExhaustiveOptimum) {
  const Dataset ds = make_dataset(test::matrix({{0, 0}, {1, 0}, {2, 0}, {3, 0}, {0, 1}, {1, 1}, {2, 1}, {3, 1}}),
                                  {0, 0, 1, 1, 0, 1, 1, 1});
  EXPECT_EQ(oracle_best(ds, all_rows(ds), 2), 8u);
  const CartTree t = fit_cart(ds, all_rows(ds), {.max_depth = 2});
  EXPECT_EQ(t.nodes[0].feature, 0);
  EXPECT_DOUBLE_EQ(t.nodes[0].threshold, 1.5);
  EXPECT_EQ(correct(t, ds), 7u);
}

TEST(FitCart, RejectsEmptyRowsAndZeroMinLeaf) {
  const Dataset ds = make_dataset(test::matrix({{0.0}, {1.0}}), {0, 1});
  EXPECT_THROW(fit_cart(ds, IndexList{}, {}), std::invalid_argument);
  EXPECT_THROW(fit_cart(ds, IndexList{0}, {.max_depth = 2, .min_leaf = 0}), std::invalid_argument);
}

TEST(FitCartProperty, InvariantsAndGreedyDominatesBestStump) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Dataset ds = test::random_dataset(4 + seed % 7, 2, 2 + seed % 2, seed);
    const auto rows = all_rows(ds);
    std::size_t previous = 0;
    for (std::size_t depth = 0; depth <= 4; ++depth) {
      const CartTree t = fit_cart(ds, rows, {.max_depth = depth});
      EXPECT_LE(t.depth(), depth);
      for (const auto& node : t.nodes) {
        if (node.is_leaf()) expect_probability_vector(node.distribution);
        else EXPECT_NE(node.left, node.right);
      }
      const std::size_t acc = correct(t, ds);
      EXPECT_GE(acc, previous) << "seed " << seed << " depth " << depth;
      previous = acc;
      if (depth == 2) EXPECT_GE(acc, oracle_best(ds, rows, 1)) << "seed " << seed;
    }
  }
}

TEST(FitBagged, FullRatiosGiveEmptyOobAndIdenticalTrees) {
  const Dataset ds = test::random_dataset(40, 3, 2, 4);
  BaggingOptions opts;
  opts.num_trees = 4;
  opts.fixed_instance_ratio = 1.0;
  opts.fixed_feature_ratio = 1.0;
  const auto ens = fit_bagged(ds, all_rows(ds), opts, 1);
  for (std::size_t j = 0; j < ens.size(); ++j) {
    EXPECT_TRUE(ens.oob[j].empty());
    EXPECT_EQ(ens.in_bag[j], all_rows(ds));
    EXPECT_EQ(ens.trees[j], ens.trees[0]);
  }
  EXPECT_EQ(ens.trees[0], fit_cart(ds, all_rows(ds), opts.cart));
}

TEST(FitBagged, FiftyTreesSatisfyBagInvariants) {
  const Dataset ds = test::random_dataset(120, 10, 3, 2);
  IndexList rows;
  for (std::size_t i = 0; i < ds.n(); i += 2) rows.push_back(i);
  const auto ens = fit_bagged(ds, rows, {}, 8);
  ASSERT_EQ(ens.size(), 50u);
  for (std::size_t j = 0; j < ens.size(); ++j) {
    IndexList merged;
    std::merge(ens.in_bag[j].begin(), ens.in_bag[j].end(), ens.oob[j].begin(), ens.oob[j].end(),
               std::back_inserter(merged));
    EXPECT_EQ(merged, rows);
    const double inst = static_cast<double>(ens.in_bag[j].size()) / static_cast<double>(rows.size());
    const double feat = static_cast<double>(ens.feature_subsets[j].size()) / 10.0;
    EXPECT_GE(inst, 0.5 - 0.5 / 60.0);
    EXPECT_LE(inst, 0.9 + 0.5 / 60.0);
    EXPECT_GE(feat, 0.5 - 0.05);
    EXPECT_LE(feat, 0.9 + 0.05);
    for (const auto& node : ens.trees[j].nodes)
      if (!node.is_leaf())
        EXPECT_TRUE(std::binary_search(ens.feature_subsets[j].begin(), ens.feature_subsets[j].end(),
                                       static_cast<std::size_t>(node.feature)));
  }
}

TEST(FitBagged, DeterministicGivenSeed) {
  const Dataset ds = test::random_dataset(80, 4, 2, 3);
  const auto a = fit_bagged(ds, all_rows(ds), {}, 21);
  const auto b = fit_bagged(ds, all_rows(ds), {}, 21);
  EXPECT_EQ(a.trees, b.trees);
  EXPECT_EQ(a.in_bag, b.in_bag);
  EXPECT_EQ(a.feature_subsets, b.feature_subsets);
  EXPECT_THROW(fit_bagged(ds, IndexList{0}, {}, 1), Error);
}

TEST(ProbaTensor, SingleLeafModelAndSliceSums) {
  const Dataset tiny = make_dataset(test::matrix({{0.0}, {1.0}, {2.0}}), {0, 0, 0}, 2);
  BaggingOptions opts;
  opts.num_trees = 1;
  opts.fixed_instance_ratio = 1.0;
  opts.fixed_feature_ratio = 1.0;
  const auto leaf = fit_bagged(tiny, all_rows(tiny), opts, 0);
  const auto f1 = proba_tensor(leaf, tiny.features, all_rows(tiny));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(f1(i, 0, 0), 1.0);
    EXPECT_DOUBLE_EQ(f1(i, 0, 1), 0.0);
  }

  const Dataset ds = test::random_dataset(60, 3, 3, 6);
  const auto ens = fit_bagged(ds, all_rows(ds), {}, 2);
  const IndexList rows{5, 1, 9, 30};
  const IndexList permuted{30, 9, 5, 1};
  const auto f = proba_tensor(ens, ds.features, rows);
  const auto g = proba_tensor(ens, ds.features, permuted);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < ens.size(); ++j) expect_probability_vector(f.distribution(i, j));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t s = static_cast<std::size_t>(std::find(permuted.begin(), permuted.end(), rows[r]) - permuted.begin());
    EXPECT_TRUE(std::equal(f.instance(r).begin(), f.instance(r).end(), g.instance(s).begin()));
  }
}
