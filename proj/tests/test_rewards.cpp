#include <gtest/gtest.h>

#include <cmath>

#include "af/rewards.hpp"

using namespace af;

namespace {

std::vector<double> random_distribution(Rng& rng, std::size_t k) {
  std::vector<double> p(k);
  double s = 0.0;
  for (auto& v : p) s += (v = rng.uniform());
  for (auto& v : p) v /= s;
  return p;
}

// Scalar restatement of each reward, written against the formulas directly.
double scalar_reward(const std::vector<double>& p, std::size_t y, RewardVariant v, double alpha, double eps) {
  const std::size_t k = p.size();
  std::size_t best = 0;
  for (std::size_t c = 1; c < k; ++c)
    if (p[c] > p[best]) best = c;
  switch (v) {
    case RewardVariant::hard: return best == y;
    case RewardVariant::soft: return p[y];
    case RewardVariant::threshold_soft: return p[y] >= alpha ? p[y] : 0.0;
    case RewardVariant::euclidean: {
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c) s += std::pow(p[c] - (c == y), 2);
      return 1.0 / (1.0 + std::sqrt(s));
    }
    case RewardVariant::kl: {
      double d = 0.0;
      const double z = 1.0 + eps * static_cast<double>(k - 1);
      for (std::size_t c = 0; c < k; ++c)
        if (p[c] > 0) d += p[c] * std::log(p[c] * z / (c == y ? 1.0 : eps));
      return 1.0 / (1.0 + d);
    }
    case RewardVariant::nce: return std::log(std::max(p[y], eps));
  }
  return NAN;
}

}  // namespace

TEST(Aggregate, IdentityMidpointAndConvexity) {
  const std::vector<double> rows{0.2, 0.8, 1.0, 0.0};
  EXPECT_EQ(aggregate(rows, WeightVector({1.0, 0.0})), (std::vector<double>{0.2, 0.8}));
  const std::vector<double> opposite{1.0, 0.0, 0.0, 1.0};
  EXPECT_EQ(aggregate(opposite, WeightVector({0.5, 0.5})), (std::vector<double>{0.5, 0.5}));
  Rng rng(3);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> f;
    for (int j = 0; j < 4; ++j) {
      const auto p = random_distribution(rng, 3);
      f.insert(f.end(), p.begin(), p.end());
    }
    const auto out = aggregate(f, WeightVector(random_distribution(rng, 4)));
    EXPECT_NEAR(out[0] + out[1] + out[2], 1.0, 1e-12);
  }
}

TEST(RewardValue, PerfectPrediction) {
  const std::vector<double> p{0.0, 1.0, 0.0};
  const RewardParams params;
  EXPECT_EQ(reward_value(p, 1, RewardVariant::hard, params), 1.0);
  EXPECT_EQ(reward_value(p, 1, RewardVariant::soft, params), 1.0);
  EXPECT_EQ(reward_value(p, 1, RewardVariant::euclidean, params), 1.0);
  EXPECT_EQ(reward_value(p, 1, RewardVariant::nce, params), 0.0);
}

TEST(RewardValue, HalfHalfArithmetic) {
  const std::vector<double> p{0.5, 0.5};
  EXPECT_NEAR(reward_value(p, 0, RewardVariant::euclidean, {}), 0.585786437626905, 1e-12);
  EXPECT_NEAR(reward_value(p, 0, RewardVariant::nce, {}), -0.693147180559945, 1e-12);
  EXPECT_EQ(reward_value(p, 1, RewardVariant::hard, {}), 0.0);  // tie goes to class 0
}

TEST(RewardValue, Threshold) {
  EXPECT_DOUBLE_EQ(reward_value(std::vector<double>{0.3, 0.7}, 1, RewardVariant::threshold_soft, {}), 0.7);
  EXPECT_DOUBLE_EQ(reward_value(std::vector<double>{0.6, 0.4}, 1, RewardVariant::threshold_soft, {}), 0.0);
}

TEST(RewardVariantNames, RoundTripAndUnknown) {
  for (auto v : kAllRewardVariants) EXPECT_EQ(reward_variant_from_string(to_string(v)), v);
  EXPECT_THROW(reward_variant_from_string("entropy"), Error);
}

TEST(ComputeRewardMatrix, MatchesScalarOracleAndPermutesWithColumns) {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 6, m = 4, k = 3;
    ProbaTensor f(n, m, k);
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = rng.below(k);
      for (std::size_t j = 0; j < m; ++j) {
        const auto p = random_distribution(rng, k);
        for (std::size_t c = 0; c < k; ++c) f(i, j, c) = p[c];
      }
    }
    std::vector<WeightVector> w;
    for (int t = 0; t < 5; ++t) w.emplace_back(random_distribution(rng, m));
    std::vector<WeightVector> reversed(w.rbegin(), w.rend());
    for (auto variant : kAllRewardVariants) {
      const RewardParams params{.alpha = 0.4, .prob_floor = 1e-3};
      const auto r = compute_reward_matrix(f, labels, w, variant, params);
      const auto rr = compute_reward_matrix(f, labels, reversed, variant, params);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t < w.size(); ++t) {
          EXPECT_NEAR(r.values(i, t), scalar_reward(aggregate(f.instance(i), w[t]), labels[i], variant, 0.4, 1e-3),
                      1e-12);
          EXPECT_EQ(r.values(i, t), rr.values(i, w.size() - 1 - t));
        }
    }
  }
}

TEST(ComputeRewardMatrix, ParameterErrors) {
  ProbaTensor f(1, 1, 2);
  f(0, 0, 0) = 1.0;
  const std::vector<std::size_t> y{0};
  const std::vector<WeightVector> w{WeightVector({1.0})};
  EXPECT_THROW(compute_reward_matrix(f, y, w, RewardVariant::soft, {.alpha = 1.5}), std::invalid_argument);
  EXPECT_THROW(compute_reward_matrix(f, y, w, RewardVariant::nce, {.prob_floor = 0.0}), std::invalid_argument);
  EXPECT_THROW(compute_reward_matrix(f, y, w, RewardVariant::nce, {.prob_floor = 0.1}), std::invalid_argument);
}

// P_y sweeps upward with the off-class mass kept proportional. KL is only
// monotone up to P_y = 1 / (1 + eps): past that point the smoothed target
// itself is overshot.
TEST(RewardProperty, MonotoneInTrueClassMass) {
  Rng rng(5);
  const RewardParams params;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.below(4);
    const std::size_t y = rng.below(k);
    auto rest = random_distribution(rng, k - 1);
    double previous[6];
    for (int step = 0; step <= 100; ++step) {
      const double py = 0.01 * step * (1.0 / (1.0 + params.prob_floor));
      std::vector<double> p;
      for (std::size_t c = 0, r = 0; c < k; ++c) p.push_back(c == y ? py : (1.0 - py) * rest[r++]);
      const RewardVariant variants[] = {RewardVariant::soft, RewardVariant::euclidean, RewardVariant::kl,
                                        RewardVariant::nce};
      for (int v = 0; v < 4; ++v) {
        const double value = reward_value(p, y, variants[v], params);
        if (step > 0) EXPECT_GT(value, previous[v]) << to_string(variants[v]) << " step " << step;
        previous[v] = value;
      }
    }
  }
}
