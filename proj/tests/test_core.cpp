#include <gtest/gtest.h>

#include <set>

#include "af/core.hpp"

using namespace af;

TEST(Matrix, RowsAndAppend) {
  Matrix<double> m;
  m.append_row(std::vector<double>{1, 2, 3});
  m.append_row(std::vector<double>{4, 5, 6});
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m(1, 2), 6.0);
  EXPECT_EQ(m.row(1)[0], 4.0);
  EXPECT_THROW(m.append_row(std::vector<double>{1}), std::invalid_argument);
}

TEST(Argmax, TiesGoToLowestIndex) {
  EXPECT_EQ(argmax(std::vector<double>{0.2, 0.4, 0.4}), 1u);
  EXPECT_EQ(argmax(std::vector<double>{0.5, 0.5}), 0u);
}

TEST(Rng, ReproducibleAndInRange) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs = differs || x != c.next();
  }
  EXPECT_TRUE(differs);
  Rng r(1);
  std::set<std::size_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = r.below(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Rng, SampleWithoutReplacementIsSortedAndDistinct) {
  Rng r(5);
  for (std::size_t k = 0; k <= 10; ++k) {
    const auto s = r.sample_without_replacement(10, k);
    ASSERT_EQ(s.size(), k);
    EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
    EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), k);
  }
  EXPECT_THROW(r.sample_without_replacement(3, 4), std::invalid_argument);
}

TEST(DeriveSeed, StreamsAreDistinct) {
  std::set<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 20; ++s)
    for (std::uint64_t stream = 0; stream < 10; ++stream) seeds.insert(derive_seed(s, stream));
  EXPECT_EQ(seeds.size(), 200u);
  EXPECT_EQ(derive_seed(3, 1), derive_seed(3, 1));
}
