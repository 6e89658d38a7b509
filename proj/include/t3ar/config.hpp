#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "t3ar/experiments.hpp"

namespace t3ar {

/// Everything a CLI command reads from a config file. Keys are listed in
/// docs/config.md.
struct RunConfig {
  ExperimentConfig experiment = ExperimentConfig::reference();
  std::uint64_t seed = 1;  // cmd_adapt and cmd_gen
  std::vector<double> fractions = {0.05, 0.25, 1.0};
  std::vector<std::size_t> nr_values = {0, 1, 2, 4, 8};
  std::vector<double> mix_fractions = {0.0, 0.25, 0.5, 1.0};
  std::vector<PoolVariant> pool_variants = {PoolVariant::parse("all"),
                                            PoolVariant::parse("drop:0"),
                                            PoolVariant::parse("keep:0")};
  /// When non-empty, cmd_adapt and cmd_sweep load source/target/pool
  /// containers from this directory instead of generating them.
  std::string data_dir;

  /// Cross-field checks on top of ExperimentConfig::validate.
  void validate() const;
};

/// Parses "key = value" lines; '#' starts a comment. Unknown keys, repeated
/// keys and malformed values raise ConfigError. The result is validated.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Every key with its effective value, sorted by key, one "key = value" per
/// line. parse_config(canonical_text(c)) reproduces c.
std::string canonical_text(const RunConfig& config);
/// 16 hex digits of the 64-bit FNV-1a hash of canonical_text.
std::string config_hash(const RunConfig& config);

}  // namespace t3ar
