#include "t3ar/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "t3ar/container.hpp"

namespace t3ar {
namespace {

// Class pair p owns coordinate block p. Blocks come in rotation partners
// (0,1), (2,3), ..., so there is always an even number of them.
std::size_t block_count(const ShiftSpec& spec) {
  const std::size_t pairs = (spec.num_classes + 1) / 2;
  return 2 * ((pairs + 1) / 2);
}

std::size_t block_size(const ShiftSpec& spec) { return spec.input_dim / block_count(spec); }

std::vector<double> class_mean(const ShiftSpec& spec, std::size_t c) {
  std::vector<double> mean(spec.input_dim, 0.0);
  const std::size_t b = block_size(spec);
  const double v = (c % 2 == 0 ? 1.0 : -1.0) * spec.separation / std::sqrt(static_cast<double>(b));
  for (std::size_t j = 0; j < b; ++j) mean[(c / 2) * b + j] = v;
  return mean;
}

std::vector<float> gaussian_sample(std::span<const double> mean, double scale, Rng& rng) {
  std::vector<float> x(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    x[i] = static_cast<float>(mean[i] + scale * rng.normal());
  }
  return x;
}

// Stream labels for make_shifted_task.
enum : std::uint64_t { kSourceStream = 1, kTargetStream, kPoolStream, kCenterStream };

}  // namespace

void Dataset::validate() const {
  const std::size_t n = ids.size();
  if (samples.rows() != n || tags.size() != n) {
    throw Error("dataset field lengths disagree");
  }
  if (labels && labels->size() != n) throw Error("dataset label count disagrees");
  std::unordered_set<std::uint64_t> seen;
  for (auto id : ids) {
    if (!seen.insert(id).second) throw Error("duplicate id " + std::to_string(id));
  }
}

Dataset Dataset::select(std::span<const std::size_t> rows) const {
  Dataset out;
  out.samples = Matrix<float>(rows.size(), dim());
  if (labels) out.labels.emplace();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = samples.row(rows[r]);
    std::copy(src.begin(), src.end(), out.samples.row(r).begin());
    out.ids.push_back(ids[rows[r]]);
    out.tags.push_back(tags[rows[r]]);
    if (labels) out.labels->push_back((*labels)[rows[r]]);
  }
  return out;
}

std::size_t Dataset::row_of(std::uint64_t id) const {
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) throw Error("unknown sample id " + std::to_string(id));
  return static_cast<std::size_t>(it - ids.begin());
}

void ShiftSpec::validate() const {
  if (num_classes == 0 || input_dim == 0) throw ConfigError("num_classes and input_dim must be >= 1");
  if (block_count(*this) > input_dim) {
    throw ConfigError("input_dim must be at least 2 * ceil(ceil(num_classes / 2) / 2)");
  }
  if (separation < 0.0 || within_scale < 0.0) {
    throw ConfigError("separation and within_scale must be non-negative");
  }
  if (separation == 0.0 && within_scale == 0.0) {
    throw ConfigError("degenerate shift spec: zero separation with zero scale");
  }
  if (!(distractor_scale > 0.0) || !(distractor_distance >= 0.0)) {
    throw ConfigError("distractor_scale must be > 0 and distractor_distance >= 0");
  }
  if (!(pool_mix_fraction >= 0.0 && pool_mix_fraction <= 1.0)) {
    throw ConfigError("pool_mix_fraction must be in [0, 1]");
  }
  if (!(duplicate_fraction >= 0.0 && duplicate_fraction <= 1.0)) {
    throw ConfigError("duplicate_fraction must be in [0, 1]");
  }
  if (!translation.empty() && translation.size() != input_dim) {
    throw ConfigError("translation must be empty or have input_dim entries");
  }
  if (distractor_clusters == 0 && pool_mix_fraction < 1.0) {
    throw ConfigError("distractor_clusters must be >= 1 unless the pool is all target-domain");
  }
  if (distractor_clusters > 0xFFFE) throw ConfigError("too many distractor clusters");
}

std::vector<float> apply_shift(const ShiftSpec& spec, std::span<const float> x) {
  if (x.size() != spec.input_dim) throw Error("apply_shift: dimension mismatch");
  const double c = std::cos(spec.rotation_angle);
  const double s = std::sin(spec.rotation_angle);
  const std::size_t bs = block_size(spec);
  std::vector<float> out(x.begin(), x.end());
  for (std::size_t k = 0; k + 1 < block_count(spec); k += 2) {
    for (std::size_t j = 0; j < bs; ++j) {
      const std::size_t i0 = k * bs + j;
      const std::size_t i1 = (k + 1) * bs + j;
      const double a = x[i0];
      const double b = x[i1];
      out[i0] = static_cast<float>(c * a - s * b);
      out[i1] = static_cast<float>(s * a + c * b);
    }
  }
  if (!spec.translation.empty()) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = static_cast<float>(out[i] + spec.translation[i]);
    }
  }
  return out;
}

ShiftedTask make_shifted_task(const ShiftSpec& spec, const TaskSizes& sizes,
                              std::uint64_t seed) {
  spec.validate();
  const std::size_t C = spec.num_classes;
  if (sizes.source < C || sizes.target < C || sizes.pool < C) {
    throw ConfigError("every dataset needs at least num_classes samples");
  }
  const std::size_t D = spec.input_dim;
  std::uint64_t next_id = 1;
  ShiftedTask task;

  auto labeled = [&](std::size_t n, Rng rng, bool shifted) {
    Dataset ds;
    ds.samples = Matrix<float>(n, D);
    ds.labels.emplace();
    for (std::size_t i = 0; i < n; ++i) {
      const auto label = static_cast<std::uint32_t>(i % C);
      const auto mean = class_mean(spec, label);
      auto x = gaussian_sample(mean, spec.within_scale, rng);
      if (shifted) x = apply_shift(spec, x);
      std::copy(x.begin(), x.end(), ds.samples.row(i).begin());
      ds.ids.push_back(next_id++);
      ds.tags.push_back(0);
      ds.labels->push_back(label);
    }
    return ds;
  };
  task.source = labeled(sizes.source, Rng::derive(seed, {kSourceStream}), false);
  task.target = labeled(sizes.target, Rng::derive(seed, {kTargetStream}), true);

  // Distractor centers.
  Rng center_rng = Rng::derive(seed, {kCenterStream});
  Matrix<double> centers(spec.distractor_clusters, D);
  for (std::size_t j = 0; j < spec.distractor_clusters; ++j) {
    std::vector<double> dir(D);
    for (auto& v : dir) v = center_rng.normal();
    dir = l2_normalize(dir);
    for (std::size_t i = 0; i < D; ++i) {
      centers(j, i) = dir[i] * spec.distractor_distance * spec.separation;
    }
  }

  const std::size_t n = sizes.pool;
  const auto n_target_domain =
      static_cast<std::size_t>(std::llround(spec.pool_mix_fraction * static_cast<double>(n)));
  const auto n_dup = static_cast<std::size_t>(
      std::llround(spec.duplicate_fraction * static_cast<double>(n_target_domain)));
  Rng pool_rng = Rng::derive(seed, {kPoolStream});
  Matrix<float> rows(n, D);
  std::vector<std::uint16_t> tags(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> x;
    if (i < n_dup) {
      const auto src = task.target.samples.row(i % task.target.size());
      x.assign(src.begin(), src.end());
      for (auto& v : x) {
        v = static_cast<float>(v + spec.duplicate_jitter * spec.within_scale * pool_rng.normal());
      }
      tags[i] = kTargetDomainTag;
    } else if (i < n_target_domain) {
      x = apply_shift(spec, gaussian_sample(class_mean(spec, i % C), spec.within_scale, pool_rng));
      tags[i] = kTargetDomainTag;
    } else {
      const std::size_t j = (i - n_target_domain) % spec.distractor_clusters;
      x = gaussian_sample(centers.row(j), spec.distractor_scale, pool_rng);
      tags[i] = static_cast<std::uint16_t>(1 + j);
    }
    std::copy(x.begin(), x.end(), rows.row(i).begin());
  }
  // Interleave origins so ID order carries no information about the tag.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  pool_rng.shuffle(order.begin(), order.end());
  task.pool.samples = Matrix<float>(n, D);
  for (std::size_t r = 0; r < n; ++r) {
    const auto src = rows.row(order[r]);
    std::copy(src.begin(), src.end(), task.pool.samples.row(r).begin());
    task.pool.ids.push_back(next_id++);
    task.pool.tags.push_back(tags[order[r]]);
  }
  return task;
}

void AugmentSpec::validate() const {
  if (!(data_scale >= 0.0) || !(weak_sigma >= 0.0) || !(strong_sigma >= 0.0)) {
    throw ConfigError("augmentation scales must be non-negative");
  }
  if (!(drop_prob >= 0.0 && drop_prob <= 1.0)) throw ConfigError("drop_prob must be in [0, 1]");
  if (!(weak_drop_prob >= 0.0 && weak_drop_prob <= 1.0)) {
    throw ConfigError("weak_drop_prob must be in [0, 1]");
  }
}

std::vector<float> weak_aug(const AugmentSpec& spec, std::span<const float> x, Rng& rng) {
  const double sigma = spec.weak_sigma * spec.data_scale;
  std::vector<float> out(x.begin(), x.end());
  if (sigma != 0.0) {
    for (auto& v : out) v = static_cast<float>(v + sigma * rng.normal());
  }
  if (spec.weak_drop_prob > 0.0) {
    for (auto& v : out) {
      if (rng.bernoulli(spec.weak_drop_prob)) v = 0.0f;
    }
  }
  return out;
}

std::vector<float> strong_aug(const AugmentSpec& spec, std::span<const float> x, Rng& rng) {
  const double sigma = spec.strong_sigma * spec.data_scale;
  std::vector<float> out(x.begin(), x.end());
  for (auto& v : out) {
    if (sigma != 0.0) v = static_cast<float>(v + sigma * rng.normal());
    if (rng.bernoulli(spec.drop_prob)) v = 0.0f;
  }
  return out;
}

Rng augment_stream(std::uint64_t seed, std::uint64_t sample_id, std::uint64_t step, View view) {
  return Rng::derive(seed, {sample_id, step, static_cast<std::uint64_t>(view)});
}

Dataset stratified_subsample(const Dataset& dataset, double fraction, std::uint64_t seed) {
  if (!dataset.labeled()) throw Error("stratified subsampling needs labels");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("fraction must be in (0, 1]");
  std::map<std::uint32_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < dataset.size(); ++i) by_class[(*dataset.labels)[i]].push_back(i);

  Rng rng = Rng::derive(seed, {0x57A7});
  std::vector<std::size_t> chosen;
  for (const auto& [label, rows] : by_class) {
    // The epsilon keeps products like 0.07 * 100 = 7.000000000000001 at 7.
    const auto take = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(rows.size()) - 1e-9));
    if (take == 0) throw Error("class " + std::to_string(label) + " empty after subsampling");
    for (auto p : rng.sample_without_replacement(rows.size(), take)) chosen.push_back(rows[p]);
  }
  rng.shuffle(chosen.begin(), chosen.end());
  return dataset.select(chosen);
}

Matrix<float> embed_for_retrieval(const Dataset& dataset, const EmbedSpec& spec) {
  const std::size_t n = dataset.size();
  const std::size_t D = dataset.dim();
  if (spec.mode == EmbedMode::Identity) {
    Matrix<float> out(n, D);
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = l2_normalize(dataset.samples.row(i));
      std::copy(v.begin(), v.end(), out.row(i).begin());
    }
    return out;
  }
  const std::size_t d = spec.projection_dim == 0 ? D : spec.projection_dim;
  Rng rng = Rng::derive(spec.seed, {0x9B0});
  Matrix<double> proj(d, D);
  const double scale = 1.0 / std::sqrt(static_cast<double>(D));
  for (auto& v : proj.values()) v = scale * rng.normal();
  Matrix<float> out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> y(d, 0.0);
    const auto x = dataset.samples.row(i);
    for (std::size_t r = 0; r < d; ++r) {
      const auto pr = proj.row(r);
      for (std::size_t c = 0; c < D; ++c) y[r] += pr[c] * static_cast<double>(x[c]);
    }
    const auto v = l2_normalize(y);
    for (std::size_t r = 0; r < d; ++r) out(i, r) = static_cast<float>(v[r]);
  }
  return out;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  dataset.validate();
  Container c{dataset.samples, dataset.ids, dataset.tags,
              std::vector<std::uint32_t>(dataset.size(), kUnlabeled)};
  if (dataset.labels) {
    for (auto l : *dataset.labels) {
      if (l == kUnlabeled) throw Error("label value 0xFFFFFFFF is reserved");
    }
    c.labels = *dataset.labels;
  }
  write_file(path, encode_container(c));
}

Dataset load_dataset(const std::filesystem::path& path) {
  Container c = decode_container(read_file(path));
  Dataset ds;
  ds.samples = std::move(c.values);
  ds.ids = std::move(c.ids);
  ds.tags = std::move(c.tags);
  const auto unlabeled = static_cast<std::size_t>(
      std::count(c.labels.begin(), c.labels.end(), kUnlabeled));
  if (unlabeled != c.labels.size()) {
    if (unlabeled != 0) throw Error("partially labeled T3AR file " + path.string());
    ds.labels = std::move(c.labels);
  }
  ds.validate();
  return ds;
}

}  // namespace t3ar
