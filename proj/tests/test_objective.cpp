#include <gtest/gtest.h>

#include <cmath>

#include "oracles/oracles.hpp"
#include "support/fixtures.hpp"
#include "t3ar/objective.hpp"

using namespace t3ar;

TEST(InfoNce, MatchesOracle) {
  fixtures::Gen g(1);
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = fixtures::uniform(g, 1, 8);
    const auto q = fixtures::unit(g, d);
    const auto k = fixtures::unit(g, d);
    std::vector<oracle::Vec> negs(fixtures::uniform(g, 1, 10));
    for (auto& n : negs) n = fixtures::unit(g, d);
    std::vector<std::span<const double>> spans(negs.begin(), negs.end());
    for (bool include : {true, false}) {
      const auto got = info_nce<double>(q, k, spans, 0.07, include);
      const auto want = oracle::info_nce(q, k, negs, 0.07, include);
      EXPECT_NEAR(got.loss, want.loss, 1e-9);
      for (std::size_t i = 0; i < d; ++i) {
        EXPECT_NEAR(got.grad_q[i], want.grad_q[i], 1e-9);
        EXPECT_NEAR(got.grad_k[i], want.grad_k[i], 1e-9);
      }
    }
  }
}

TEST(InfoNce, EmptyNegativeSet) {
  const std::vector<double> q = {1, 0};
  const std::vector<double> k = {0, 1};
  const auto r = info_nce<double>(q, k, {}, 0.5, true);
  EXPECT_DOUBLE_EQ(r.loss, 0.0);
  EXPECT_THROW(info_nce<double>(q, k, {}, 0.5, false), Error);
}

TEST(InfoNce, RejectsBadInput) {
  const std::vector<double> q = {1, 0};
  const std::vector<double> k = {0, 1};
  const std::vector<double> long_q = {2, 0};
  EXPECT_THROW(info_nce<double>(q, k, {}, 0.0, true), Error);
  EXPECT_THROW(info_nce<double>(long_q, k, {}, 0.1, true), Error);
  const std::vector<double> three = {1, 0, 0};
  EXPECT_THROW(info_nce<double>(q, three, {}, 0.1, true), Error);
}

TEST(InfoNce, NegativeGradientsOnRequest) {
  fixtures::Gen g(2);
  const auto q = fixtures::unit(g, 4), k = fixtures::unit(g, 4), n = fixtures::unit(g, 4);
  std::vector<std::span<const double>> spans = {n};
  EXPECT_TRUE(info_nce<double>(q, k, spans, 0.1, true, false).grad_negatives.empty());
  EXPECT_EQ(info_nce<double>(q, k, spans, 0.1, true, true).grad_negatives.rows(), 1u);
}

TEST(InfoNce, FloatIsStableAtLowTemperature) {
  fixtures::Gen g(3);
  const auto q = fixtures::unit_float(g, 16);
  std::vector<std::vector<float>> negs;
  for (int j = 0; j < 64; ++j) negs.push_back(fixtures::unit_float(g, 16));
  std::vector<std::span<const float>> spans(negs.begin(), negs.end());
  const auto r = info_nce<float>(q, q, spans, 0.01, true);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_TRUE(all_finite<float>(r.grad_q));
}

TEST(CrossEntropy, MatchesOracle) {
  fixtures::Gen g(4);
  for (int t = 0; t < 50; ++t) {
    auto logits = fixtures::gaussian(g, 6);
    for (auto& v : logits) v *= 30;
    const std::size_t label = fixtures::uniform(g, 0, 5);
    const auto got = ce_consistency<double>(logits, label);
    const auto want = oracle::cross_entropy(logits, label);
    EXPECT_NEAR(got.loss, want.loss, 1e-9);
    for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(got.grad_logits[c], want.grad[c], 1e-12);
  }
  const std::vector<double> two = {0, 0};
  EXPECT_THROW(ce_consistency<double>(two, 2), Error);
}

TEST(PseudoLabel, AveragesResidentSnapshots) {
  MemoryBank bank(8);
  BankEntry a;
  a.sample_id = 5;
  a.feature = {1, 0};
  a.logits = std::vector<float>{0, 3};
  BankEntry other = a;
  other.sample_id = 6;
  other.logits = std::vector<float>{9, 0};
  bank.enqueue({a, other});
  const std::vector<float> current = {2, 0};
  const auto pl = filtered_pseudo_label(bank, 5, current);
  EXPECT_EQ(pl.label, 1u);
  EXPECT_FLOAT_EQ(pl.averaged_logits[0], 1.0f);
  EXPECT_FLOAT_EQ(pl.averaged_logits[1], 1.5f);
  EXPECT_EQ(filtered_pseudo_label(bank, 99, current).label, 0u);
}

TEST(NegativeSet, RetrievalDisabledIgnoresTable) {
  fixtures::Gen g(5);
  MemoryBank bank(10);
  bank.enqueue({fixtures::pool_entry(g, 100, 3), fixtures::target_entry(g, 1, 3, 2)});
  Rng rng(1);
  const auto sel = build_negative_set(2, 5, bank, nullptr, 0, 5, rng);
  EXPECT_TRUE(sel.sampled_neighbors.empty());
  EXPECT_EQ(sel.negatives.size(), 1u);
  EXPECT_EQ(sel.negatives.retrieved_count(), 0u);
  EXPECT_THROW(build_negative_set(2, 5, bank, nullptr, 1, 5, rng), Error);
}

TEST(NegativeSet, ResidentNeighborsOnly) {
  fixtures::Gen g(6);
  MemoryBank bank(10);
  bank.enqueue({fixtures::pool_entry(g, 100, 3), fixtures::pool_entry(g, 101, 3)});
  NeighborTable table({1}, {{100, 102, 101}});
  Rng rng(2);
  const auto sel = build_negative_set(1, 0, bank, &table, 3, 1, rng);
  EXPECT_EQ(sel.sampled_neighbors.size(), 3u);
  EXPECT_EQ(sel.negatives.retrieved_count(), 2u);
  EXPECT_EQ(sel.negatives.features().size(), 2u);
}

TEST(LossConfig, Validation) {
  LossConfig c;
  EXPECT_NO_THROW(c.validate());
  c.temperature = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.lambda_ctr = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.r = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_DOUBLE_EQ(total_loss(1.0, 2.0, 0.5), 2.0);
}
