#pragma once

#include <cstdint>
#include <initializer_list>
#include <utility>
#include <vector>

namespace t3ar {

/// Counter-based generator: the i-th output is a bijective hash of
/// (key, i), so a stream is fully determined by its key. Child streams are
/// derived by hashing the parent key with a stream label, which makes
/// e.g. per-sample augmentation noise a pure function of (seed, id, step).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x9E3779B97F4A7C15ull)) {}

  /// Stream keyed by `seed` followed by every label in `path`.
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    Rng rng(seed);
    for (std::uint64_t label : path) rng = rng.split(label);
    return rng;
  }

  Rng split(std::uint64_t stream) const {
    Rng child(0);
    child.key_ = mix(key_ ^ mix(stream + 0xD1B54A32D192ED03ull));
    return child;
  }

  std::uint64_t next_u64() { return mix(key_ + kGamma * ++counter_); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal via Box-Muller (no cached second variate).
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  /// k distinct indices from [0, n), in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = uniform_index(i);
      using std::swap;
      swap(first[i - 1], first[j]);
    }
  }

  std::uint64_t key() const { return key_; }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace t3ar
