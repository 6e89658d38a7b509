#include <gtest/gtest.h>

#include "t3ar/experiments.hpp"

using namespace t3ar;

namespace {

ExperimentConfig tiny() {
  auto c = ExperimentConfig::reference();
  c.sizes = {240, 120, 1500};
  c.source.epochs = 3;
  c.adaptation.epochs = 2;
  c.adaptation.warmup_epochs = 1;
  c.adaptation.bank_capacity = 256;
  c.seeds = {1, 2};
  return c;
}

const std::vector<PreparedExperiment>& prepared() {
  static const std::vector<PreparedExperiment> p = [] {
    std::vector<PreparedExperiment> out;
    for (auto s : tiny().seeds) out.push_back(prepare_experiment(tiny(), s, 4));
    return out;
  }();
  return p;
}

}  // namespace

TEST(Experiments, ReferenceConfigIsValid) {
  const auto c = ExperimentConfig::reference();
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.seeds.size(), 5u);
  EXPECT_EQ(c.shift.num_classes, 6u);
  EXPECT_EQ(c.shift.input_dim, 32u);
  EXPECT_EQ(c.sizes.pool, 50000u);
  EXPECT_DOUBLE_EQ(c.shift.pool_mix_fraction, 0.2);
  EXPECT_EQ(c.adaptation.mode, Mode::TestTime);
  EXPECT_EQ(c.adaptation.loss.n_r, 2u);
}

TEST(Experiments, ValidationErrors) {
  auto c = tiny();
  c.source.mode = Mode::TestTime;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny();
  c.arch.input_dim = 16;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny();
  c.seeds.clear();
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny();
  c.dedup_threshold = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Experiments, PreparedContext) {
  const auto& p = prepared().front();
  EXPECT_EQ(p.seed, 1u);
  EXPECT_EQ(p.neighbors.list_length(), 20u);
  EXPECT_EQ(p.neighbors.size(), p.task.target.size());
  EXPECT_EQ(p.index.alive_count() + p.dropped_duplicates, p.task.pool.size());
  EXPECT_GT(p.source_only_accuracy, 1.0 / 6.0);
  EXPECT_EQ(p.source_params.velocity, p.source_params.net.zeros_like());
}

TEST(Experiments, StrongViewsDegradeTheSourceModel) {
  const auto& p = prepared().front();
  const auto& target = p.task.target;
  const AugmentSpec aug;
  Dataset strong = target;
  for (std::size_t i = 0; i < target.size(); ++i) {
    auto rng = augment_stream(5, target.ids[i], 0, View::Strong);
    const auto v = strong_aug(aug, target.samples.row(i), rng);
    std::copy(v.begin(), v.end(), strong.samples.row(i).begin());
  }
  EXPECT_LT(evaluate(p.source_params.net, strong), p.source_only_accuracy);
}

TEST(Experiments, FractionSweepTable) {
  const std::vector<double> fractions = {0.25, 1.0};
  const auto t = run_fraction_sweep(tiny(), fractions, prepared());
  EXPECT_EQ(t.columns, (std::vector<std::string>{"seed", "fraction", "n_target", "source_only",
                                                 "no_retrieval", "retrieval"}));
  ASSERT_EQ(t.rows.size(), 4u);
  EXPECT_EQ(t.number(0, "n_target"), 30.0);
  EXPECT_EQ(t.number(1, "n_target"), 120.0);
  const auto again = run_fraction_sweep(tiny(), fractions, prepared());
  EXPECT_EQ(t.to_csv(), again.to_csv());
}

TEST(Experiments, RetrieverAndNnTables) {
  const auto r = run_retriever_ablation(tiny(), prepared());
  ASSERT_EQ(r.rows.size(), 6u);
  EXPECT_EQ(r.text(0, "retriever"), "none");
  EXPECT_EQ(r.text(2, "retriever"), "random");
  const std::vector<std::size_t> nr = {0, 2, 4};
  const auto nn = run_nn_sweep(tiny(), nr, prepared());
  ASSERT_EQ(nn.rows.size(), 6u);
  // n_r = 0 runs and the "none" retriever runs are the same configuration.
  EXPECT_EQ(nn.number(0, "accuracy"), r.number(0, "accuracy"));
  const std::vector<std::size_t> too_long = {0, 8};
  EXPECT_THROW(run_nn_sweep(tiny(), too_long, prepared()), Error);
}

TEST(Experiments, PoolAblations) {
  const std::vector<PoolVariant> variants = {PoolVariant::parse("all"),
                                             PoolVariant::parse("drop:0")};
  const auto t = run_pool_ablations(tiny(), variants, prepared());
  ASSERT_EQ(t.rows.size(), 4u);
  EXPECT_EQ(t.number(0, "delta"), 0.0);
  EXPECT_LT(t.number(1, "pool_size"), t.number(0, "pool_size"));
  const std::vector<PoolVariant> empty = {PoolVariant::parse("keep:999")};
  EXPECT_THROW(run_pool_ablations(tiny(), empty, prepared()), Error);
}

TEST(PoolVariant, Parse) {
  const auto all = PoolVariant::parse("all");
  EXPECT_TRUE(all.admits(0));
  EXPECT_TRUE(all.admits(7));
  const auto keep = PoolVariant::parse("keep:0|3");
  EXPECT_TRUE(keep.admits(3));
  EXPECT_FALSE(keep.admits(1));
  const auto drop = PoolVariant::parse("drop:1");
  EXPECT_FALSE(drop.admits(1));
  EXPECT_TRUE(drop.admits(0));
  EXPECT_THROW(PoolVariant::parse("keep:"), ConfigError);
  EXPECT_THROW(PoolVariant::parse("only:1"), ConfigError);
  EXPECT_THROW(PoolVariant::parse("drop:x"), ConfigError);
}

TEST(Experiments, DomainGapTrend) {
  Table t;
  t.columns = {"seed", "mix_fraction", "pool_size", "dropped_duplicates", "accuracy"};
  const double acc[] = {0.5, 0.6, 0.55, 0.7};
  const double mix[] = {0.0, 0.25, 0.5, 1.0};
  for (int s = 1; s <= 2; ++s) {
    for (int i = 0; i < 4; ++i) {
      t.rows.push_back({std::int64_t{s}, mix[i], std::int64_t{10}, std::int64_t{0}, acc[i]});
    }
  }
  EXPECT_NEAR(domain_gap_trend(t), 0.8, 1e-12);
}

TEST(Table, CsvAndSpearman) {
  Table t;
  t.columns = {"k", "v"};
  t.rows = {{std::string("a"), 0.1}, {std::string("b"), 2.0}, {std::string("a"), 0.3}};
  EXPECT_EQ(t.to_csv(), "k,v\na,0.1\nb,2\na,0.3\n");
  const std::vector<std::string> pre = {"x=1"};
  EXPECT_EQ(t.to_csv(pre).substr(0, 6), "# x=1\n");
  const auto m = t.mean_by("k", "v");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_NEAR(m[0].second, 0.2, 1e-15);
  EXPECT_THROW(t.column("missing"), Error);
  const std::vector<double> x = {1, 2, 3, 4}, y = {10, 20, 20, 40}, c = {1, 1, 1, 1};
  EXPECT_NEAR(spearman(x, y), 0.9486832980505138, 1e-12);
  EXPECT_EQ(spearman(x, c), 0.0);
}
