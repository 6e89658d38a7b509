#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "t3ar/rng.hpp"

using t3ar::Rng;

TEST(Rng, SameKeySameStream) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    EXPECT_NE(x, c.next_u64());
  }
}

TEST(Rng, DeriveDependsOnEveryLabel) {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t a = 0; a < 10; ++a) {
    for (std::uint64_t b = 0; b < 10; ++b) firsts.insert(Rng::derive(7, {a, b}).next_u64());
  }
  EXPECT_EQ(firsts.size(), 100u);
  EXPECT_EQ(Rng::derive(7, {1, 2}).next_u64(), Rng(7).split(1).split(2).next_u64());
  EXPECT_NE(Rng::derive(7, {1, 2}).next_u64(), Rng::derive(7, {2, 1}).next_u64());
}

TEST(Rng, UniformMoments) {
  Rng rng(1);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sq += u * u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
  EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0 / 12, 0.002);
}

TEST(Rng, NormalMoments) {
  Rng rng(2);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(Rng, UniformIndexCoversRange) {
  Rng rng(3);
  std::vector<int> counts(7);
  for (int i = 0; i < 70000; ++i) {
    const auto k = rng.uniform_index(7);
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(Rng, SampleWithoutReplacementIsDistinct) {
  Rng rng(4);
  for (std::size_t n = 0; n < 30; ++n) {
    for (std::size_t k = 0; k <= n + 2; ++k) {
      const auto s = rng.sample_without_replacement(n, k);
      EXPECT_EQ(s.size(), std::min(n, k));
      std::set<std::size_t> unique(s.begin(), s.end());
      EXPECT_EQ(unique.size(), s.size());
      for (auto v : s) EXPECT_LT(v, n);
    }
  }
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng rng(5);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  auto w = v;
  rng.shuffle(w.begin(), w.end());
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}
