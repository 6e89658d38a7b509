#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "oracles/oracles.hpp"
#include "t3ar/datasets.hpp"

using namespace t3ar;

namespace {

const TaskSizes kSmall{120, 60, 500};

double norm_of(std::span<const float> v) { return l2_norm(v); }

}  // namespace

TEST(ShiftedTask, DeterministicInSeed) {
  ShiftSpec spec;
  const auto a = make_shifted_task(spec, kSmall, 3);
  const auto b = make_shifted_task(spec, kSmall, 3);
  const auto c = make_shifted_task(spec, kSmall, 4);
  EXPECT_EQ(a.source, b.source);
  EXPECT_EQ(a.pool, b.pool);
  EXPECT_NE(a.target.samples, c.target.samples);
}

TEST(ShiftedTask, IdsAreGloballyUniqueAndContiguous) {
  const auto t = make_shifted_task(ShiftSpec{}, kSmall, 1);
  std::vector<std::uint64_t> all;
  for (const auto* ds : {&t.source, &t.target, &t.pool}) all.insert(all.end(), ds->ids.begin(), ds->ids.end());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i + 1);
  EXPECT_TRUE(t.source.labeled());
  EXPECT_TRUE(t.target.labeled());
  EXPECT_FALSE(t.pool.labeled());
  EXPECT_EQ(t.source.size(), 120u);
  EXPECT_EQ(t.pool.size(), 500u);
  EXPECT_NO_THROW(t.pool.validate());
}

TEST(ShiftedTask, ClassesAreBalanced) {
  const auto t = make_shifted_task(ShiftSpec{}, kSmall, 2);
  std::map<std::uint32_t, int> counts;
  for (auto l : *t.target.labels) ++counts[l];
  ASSERT_EQ(counts.size(), 6u);
  for (const auto& [c, n] : counts) EXPECT_EQ(n, 10);
}

TEST(ShiftedTask, PoolMixFollowsFraction) {
  for (double mix : {0.0, 0.2, 1.0}) {
    ShiftSpec spec;
    spec.pool_mix_fraction = mix;
    const auto t = make_shifted_task(spec, kSmall, 5);
    const auto target_domain = std::count(t.pool.tags.begin(), t.pool.tags.end(), kTargetDomainTag);
    EXPECT_EQ(target_domain, std::llround(mix * 500));
    for (auto tag : t.pool.tags) EXPECT_LE(tag, spec.distractor_clusters);
  }
}

TEST(ShiftedTask, ValidationErrors) {
  ShiftSpec spec;
  spec.input_dim = 3;
  EXPECT_THROW(make_shifted_task(spec, kSmall, 1), ConfigError);
  spec = {};
  spec.pool_mix_fraction = 1.5;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = {};
  spec.translation = {1.0};
  EXPECT_THROW(spec.validate(), ConfigError);
  EXPECT_THROW(make_shifted_task(ShiftSpec{}, {3, 60, 500}, 1), ConfigError);
}

TEST(ApplyShift, RotationPreservesNormAndTranslationAdds) {
  ShiftSpec spec;
  std::vector<float> x(32);
  for (std::size_t i = 0; i < 32; ++i) x[i] = static_cast<float>(std::sin(1.0 + i));
  const auto y = apply_shift(spec, x);
  EXPECT_NEAR(norm_of(y), norm_of(x), 1e-5);
  EXPECT_NE(x, y);
  spec.rotation_angle = 0.0;
  spec.translation.assign(32, 0.5);
  const auto z = apply_shift(spec, x);
  for (std::size_t i = 0; i < 32; ++i) EXPECT_FLOAT_EQ(z[i], x[i] + 0.5f);
  EXPECT_THROW(apply_shift(spec, std::vector<float>(31)), Error);
}

TEST(Augment, StreamIsPureFunctionOfItsKey) {
  const std::vector<float> x(16, 1.0f);
  AugmentSpec spec;
  auto r1 = augment_stream(9, 100, 3, View::Strong);
  auto r2 = augment_stream(9, 100, 3, View::Strong);
  auto r3 = augment_stream(9, 100, 4, View::Strong);
  auto r4 = augment_stream(9, 100, 3, View::Weak);
  const auto a = strong_aug(spec, x, r1);
  EXPECT_EQ(a, strong_aug(spec, x, r2));
  EXPECT_NE(a, strong_aug(spec, x, r3));
  EXPECT_NE(a, strong_aug(spec, x, r4));
}

TEST(Augment, NoiseScalesAndDropout) {
  AugmentSpec spec;
  spec.data_scale = 2.0;
  const std::vector<float> x(20000, 0.0f);
  Rng rng(1);
  const auto w = weak_aug(spec, x, rng);
  double sq = 0;
  for (float v : w) sq += v * v;
  EXPECT_NEAR(std::sqrt(sq / x.size()), 0.1, 0.005);
  EXPECT_EQ(std::count(w.begin(), w.end(), 0.0f), 0);

  spec.strong_sigma = 0.0;
  const std::vector<float> ones(20000, 1.0f);
  const auto s = strong_aug(spec, ones, rng);
  EXPECT_NEAR(std::count(s.begin(), s.end(), 0.0f) / 20000.0, 0.2, 0.015);

  spec.weak_drop_prob = 0.5;
  const auto wd = weak_aug(spec, ones, rng);
  EXPECT_NEAR(std::count(wd.begin(), wd.end(), 0.0f) / 20000.0, 0.5, 0.02);
  spec.drop_prob = 1.5;
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(StratifiedSubsample, MatchesPerClassCounts) {
  const auto t = make_shifted_task(ShiftSpec{}, {120, 97, 500}, 6);
  for (double f : {0.05, 0.07, 0.25, 0.5, 1.0}) {
    const auto sub = stratified_subsample(t.target, f, 11);
    std::map<std::uint32_t, std::size_t> got;
    for (auto l : *sub.labels) ++got[l];
    EXPECT_EQ(got, oracle::stratified_counts(*t.target.labels, f)) << f;
    std::set<std::uint64_t> ids(sub.ids.begin(), sub.ids.end());
    EXPECT_EQ(ids.size(), sub.size());
    for (std::size_t i = 0; i < sub.size(); ++i) {
      const auto row = t.target.row_of(sub.ids[i]);
      EXPECT_EQ((*t.target.labels)[row], (*sub.labels)[i]);
      EXPECT_TRUE(std::equal(sub.samples.row(i).begin(), sub.samples.row(i).end(),
                             t.target.samples.row(row).begin()));
    }
    EXPECT_EQ(sub, stratified_subsample(t.target, f, 11));
  }
  EXPECT_THROW(stratified_subsample(t.target, 0.0, 1), ConfigError);
  EXPECT_THROW(stratified_subsample(t.pool, 0.5, 1), Error);
}

TEST(EmbedForRetrieval, RowsAreUnitNorm) {
  const auto t = make_shifted_task(ShiftSpec{}, kSmall, 7);
  const auto id = embed_for_retrieval(t.pool);
  EXPECT_EQ(id.cols(), 32u);
  const auto proj = embed_for_retrieval(t.pool, {EmbedMode::Projection, 8, 3});
  EXPECT_EQ(proj.cols(), 8u);
  for (std::size_t i = 0; i < t.pool.size(); ++i) {
    EXPECT_NEAR(norm_of(id.row(i)), 1.0, 1e-6);
    EXPECT_NEAR(norm_of(proj.row(i)), 1.0, 1e-6);
  }
  EXPECT_EQ(proj, embed_for_retrieval(t.pool, {EmbedMode::Projection, 8, 3}));
}

TEST(DatasetIo, RoundTrip) {
  const auto t = make_shifted_task(ShiftSpec{}, kSmall, 8);
  const auto dir = std::filesystem::temp_directory_path() / "t3ar_test_datasets";
  std::filesystem::create_directories(dir);
  save_dataset(t.target, dir / "target.t3ar");
  save_dataset(t.pool, dir / "pool.t3ar");
  EXPECT_EQ(load_dataset(dir / "target.t3ar"), t.target);
  EXPECT_EQ(load_dataset(dir / "pool.t3ar"), t.pool);
  std::filesystem::remove_all(dir);
}

TEST(Dataset, SelectAndValidate) {
  const auto t = make_shifted_task(ShiftSpec{}, kSmall, 9);
  const std::vector<std::size_t> rows = {5, 2};
  const auto s = t.target.select(rows);
  EXPECT_EQ(s.ids[0], t.target.ids[5]);
  EXPECT_EQ(s.row_of(t.target.ids[2]), 1u);
  EXPECT_THROW(s.row_of(999999), Error);
  auto bad = t.target;
  bad.ids[1] = bad.ids[0];
  EXPECT_THROW(bad.validate(), Error);
}
