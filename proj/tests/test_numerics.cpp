#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "t3ar/numerics.hpp"

using namespace t3ar;

TEST(Numerics, ArgmaxTiesGoToSmallestIndex) {
  EXPECT_EQ(argmax(std::vector<float>{1, 3, 3, 2}), 1u);
  EXPECT_EQ(argmax(std::vector<double>{5}), 0u);
  EXPECT_THROW(argmax(std::vector<double>{}), Error);
}

TEST(Numerics, LogSumExpIsShiftStable) {
  const std::vector<double> big = {1000.0, 1000.0};
  EXPECT_NEAR(log_sum_exp(big), 1000.0 + std::log(2.0), 1e-12);
  const std::vector<double> small = {-1000.0, -1001.0};
  EXPECT_NEAR(log_sum_exp(small), -1000.0 + std::log1p(std::exp(-1.0)), 1e-12);
  EXPECT_THROW(log_sum_exp(std::vector<double>{1.0, std::nan("")}), Error);
}

TEST(Numerics, SoftmaxSumsToOne) {
  const auto p = softmax(std::vector<double>{0.5, -2.0, 700.0, 3.0});
  double total = 0;
  for (double v : p) total += v;
  EXPECT_NEAR(total, 1.0, 1e-15);
  EXPECT_NEAR(p[2], 1.0, 1e-12);
  EXPECT_TRUE(softmax(std::vector<float>{}).empty());
}

TEST(Numerics, NormalizeRejectsDegenerateInput) {
  EXPECT_THROW(l2_normalize(std::vector<float>{0, 0, 0}), Error);
  EXPECT_THROW(l2_normalize(std::vector<float>{1, std::numeric_limits<float>::infinity()}), Error);
  const auto v = l2_normalize(std::vector<double>{3, 4});
  EXPECT_DOUBLE_EQ(v[0], 0.6);
  EXPECT_DOUBLE_EQ(v[1], 0.8);
}

TEST(Numerics, CosineIsClampedAndScaleFree) {
  const std::vector<double> a = {1, 2, 3};
  const std::vector<double> b = {2, 4, 6};
  EXPECT_LE(cosine_sim(a, b), 1.0);
  EXPECT_NEAR(cosine_sim(a, b), 1.0, 1e-15);
  EXPECT_THROW(cosine_sim(a, std::vector<double>{1, 2}), Error);
  EXPECT_THROW(cosine_sim(a, std::vector<double>{0, 0, 0}), Error);
}

TEST(Numerics, DotAccumulatesInDouble) {
  std::vector<float> a(1000, 0.1f);
  std::vector<float> b(1000, 1.0f);
  EXPECT_NEAR(dot<float>(a, b), 1000 * static_cast<double>(0.1f), 1e-9);
}

TEST(Matrix, ShapeChecks) {
  EXPECT_THROW(Matrix<float>(2, 3, std::vector<float>(5)), Error);
  Matrix<float> m;
  const std::vector<float> r = {1, 2};
  m.push_row(r);
  m.push_row(r);
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m(1, 1), 2.0f);
  const std::vector<float> wide = {1, 2, 3};
  EXPECT_THROW(m.push_row(wide), Error);
  EXPECT_EQ(m.cast<double>().cast<float>(), m);
}
