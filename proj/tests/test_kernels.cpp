#include <gtest/gtest.h>

#include <omp.h>

#include "oracles/oracles.hpp"
#include "support/fixtures.hpp"
#include "t3ar/kernels.hpp"

using namespace t3ar;

namespace {

struct Data {
  fixtures::PoolData pool;
  std::vector<std::uint8_t> alive;
  Matrix<float> queries;
};

Data make(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t nq) {
  fixtures::Gen g(seed);
  Data data;
  data.pool = fixtures::random_pool(g, n, d);
  for (std::size_t i = 0; i < n; ++i) data.alive.push_back(i % 5 != 0);
  data.queries = Matrix<float>(nq, d);
  for (auto& v : data.queries.buffer()) v = static_cast<float>(fixtures::gaussian(g, 1)[0]);
  return data;
}

class Kernels : public ::testing::Test {
 protected:
  void SetUp() override { omp_set_num_threads(4); }
};

}  // namespace

TEST_F(Kernels, RowScoresSerialEqualsParallel) {
  const auto data = make(1, 517, 13, 1);
  std::vector<double> a(517), b(517);
  kernels::serial::row_scores(data.pool.matrix, data.queries.row(0), a);
  kernels::parallel::row_scores(data.pool.matrix, data.queries.row(0), b);
  EXPECT_EQ(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i], oracle::dot(data.pool.rows[i], fixtures::to_double(data.queries.row(0))),
                1e-9);
  }
}

TEST_F(Kernels, TopKManySerialEqualsParallel) {
  const auto data = make(2, 300, 8, 37);
  for (std::size_t k : {1u, 5u, 64u, 1000u}) {
    const auto a = kernels::serial::top_k_many(data.pool.matrix, data.pool.ids, data.alive,
                                               data.queries, k);
    const auto b = kernels::parallel::top_k_many(data.pool.matrix, data.pool.ids, data.alive,
                                                 data.queries, k);
    EXPECT_EQ(a, b);
  }
}

TEST_F(Kernels, PredictManySerialEqualsParallel) {
  fixtures::Gen g(3);
  const auto net = fixtures::random_network(g, 8, {16}, 4, 5).cast<float>();
  const auto data = make(4, 1, 8, 211);
  EXPECT_EQ(kernels::serial::predict_many(net, data.queries),
            kernels::parallel::predict_many(net, data.queries));
}

TEST(SelectTopK, MatchesFullSort) {
  fixtures::Gen g(5);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = fixtures::uniform(g, 0, 60);
    std::vector<double> scores(n);
    std::vector<std::uint64_t> ids(n);
    std::vector<std::uint8_t> alive(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(fixtures::uniform(g, 0, 6));  // many ties
      ids[i] = 100 - i;
      alive[i] = fixtures::uniform(g, 0, 3) != 0;
    }
    std::vector<kernels::Hit> all;
    for (std::size_t i = 0; i < n; ++i) {
      if (alive[i]) all.push_back({ids[i], scores[i]});
    }
    std::sort(all.begin(), all.end(), kernels::ranks_before);
    const std::size_t k = fixtures::uniform(g, 0, 70);
    if (all.size() > k) all.resize(k);
    EXPECT_EQ(kernels::select_top_k(scores, ids, alive, k), all);
  }
}
