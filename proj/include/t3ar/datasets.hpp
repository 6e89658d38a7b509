#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "t3ar/numerics.hpp"
#include "t3ar/rng.hpp"

namespace t3ar {

/// Samples with unique IDs, a per-sample source tag and optional labels.
struct Dataset {
  Matrix<float> samples;
  std::vector<std::uint64_t> ids;
  std::vector<std::uint16_t> tags;
  std::optional<std::vector<std::uint32_t>> labels;

  std::size_t size() const { return ids.size(); }
  std::size_t dim() const { return samples.cols(); }
  bool labeled() const { return labels.has_value(); }

  /// Throws on length mismatches or repeated IDs.
  void validate() const;
  /// Rows at the given positions, in that order.
  Dataset select(std::span<const std::size_t> rows) const;
  /// Row position for each ID.
  std::size_t row_of(std::uint64_t id) const;

  bool operator==(const Dataset&) const = default;
};

/// Pool tag of items drawn from the target domain. Distractor cluster j is
/// tagged 1 + j.
inline constexpr std::uint16_t kTargetDomainTag = 0;

/// Synthetic covariate-shift task.
///
/// Coordinates are split into 2 * ceil(ceil(C / 2) / 2) equal blocks of
/// b = floor(D / blocks) coordinates (leftovers carry noise only). Class c
/// has mean s * separation / sqrt(b) on every coordinate of block c / 2,
/// with s = +1 for even c and -1 for odd c, plus isotropic Gaussian spread
/// within_scale. The target domain rotates, by rotation_angle, every plane
/// spanned by coordinate j of block 2k and coordinate j of block 2k + 1,
/// then adds translation. Class directions thus turn towards their
/// partner block.
/// Distractor clusters sit at distractor_distance * separation from the
/// origin in seeded random directions.
struct ShiftSpec {
  std::size_t num_classes = 6;
  std::size_t input_dim = 32;
  double separation = 3.0;
  double within_scale = 1.0;
  double rotation_angle = 0.6;
  std::vector<double> translation;  // empty means zero
  std::size_t distractor_clusters = 8;
  double distractor_scale = 1.0;
  double distractor_distance = 6.0;
  double pool_mix_fraction = 0.2;
  /// Share of the target-domain pool part made of jittered copies of
  /// target samples.
  double duplicate_fraction = 0.05;
  double duplicate_jitter = 1e-3;

  void validate() const;
};

struct TaskSizes {
  std::size_t source = 1200;
  std::size_t target = 600;
  std::size_t pool = 50000;
};

struct ShiftedTask {
  Dataset source;  // labeled
  Dataset target;  // labels present but hidden from adaptation in test-time mode
  Dataset pool;    // unlabeled, tagged by origin
};

/// IDs are globally unique: source, then target, then pool, contiguous
/// from 1.
ShiftedTask make_shifted_task(const ShiftSpec& spec, const TaskSizes& sizes,
                              std::uint64_t seed);

/// The target-domain transform on its own.
std::vector<float> apply_shift(const ShiftSpec& spec, std::span<const float> x);

struct AugmentSpec {
  double data_scale = 1.0;
  double weak_sigma = 0.05;    // multiples of data_scale
  double strong_sigma = 0.25;  // multiples of data_scale
  double drop_prob = 0.2;
  /// Coordinate dropout on the weak view. Zero for adaptation; source
  /// pre-training may raise it to make the source model robust to the
  /// strong view.
  double weak_drop_prob = 0.0;

  void validate() const;
};

/// x + N(0, (weak_sigma * data_scale)^2 I), then coordinates zeroed with
/// probability weak_drop_prob (0 by default).
std::vector<float> weak_aug(const AugmentSpec& spec, std::span<const float> x, Rng& rng);
/// x + N(0, (strong_sigma * data_scale)^2 I), then each coordinate zeroed
/// with probability drop_prob.
std::vector<float> strong_aug(const AugmentSpec& spec, std::span<const float> x, Rng& rng);

/// Stream for one augmented view: a pure function of (seed, sample id,
/// step, view).
enum class View : std::uint64_t { Weak = 1, Strong = 2, PoolStrong = 3, BankInit = 4 };
Rng augment_stream(std::uint64_t seed, std::uint64_t sample_id, std::uint64_t step, View view);

/// Per class, ceil(fraction * n_c) samples drawn without replacement.
Dataset stratified_subsample(const Dataset& dataset, double fraction, std::uint64_t seed);

enum class EmbedMode : std::uint8_t { Identity, Projection };

struct EmbedSpec {
  EmbedMode mode = EmbedMode::Identity;
  std::size_t projection_dim = 0;  // 0 means same as input
  std::uint64_t seed = 0;
};

/// Row-wise L2-normalized embeddings, optionally after a fixed seeded
/// Gaussian projection.
Matrix<float> embed_for_retrieval(const Dataset& dataset, const EmbedSpec& spec = {});

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace t3ar
