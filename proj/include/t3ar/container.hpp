#pragma once

// "T3AR" binary container, little-endian throughout.
//
//   data container (version 1):
//     char[4] "T3AR" | u16 version | u32 n | u32 d
//     n*d f32 row-major values | n u64 ids | n u16 tags
//     n u32 labels (0xFFFFFFFF = unlabeled)
//
//   checkpoint (version 0x8001):
//     char[4] "T3AR" | u16 version | u32 encoder_layers
//     then for each encoder layer followed by the head:
//       u32 out | u32 in | out*in f32 weights | out f32 biases

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "t3ar/model.hpp"
#include "t3ar/numerics.hpp"

namespace t3ar {

inline constexpr std::uint16_t kContainerVersion = 1;
inline constexpr std::uint16_t kCheckpointVersion = 0x8001;
inline constexpr std::uint32_t kUnlabeled = 0xFFFFFFFFu;

struct Container {
  Matrix<float> values;
  std::vector<std::uint64_t> ids;
  std::vector<std::uint16_t> tags;
  std::vector<std::uint32_t> labels;

  bool operator==(const Container&) const = default;
};

std::vector<std::uint8_t> encode_container(const Container& c);
/// Rejects bad magic, unknown versions, truncation and trailing bytes.
Container decode_container(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_checkpoint(const Network<float>& net);
Network<float> decode_checkpoint(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it into place.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

void save_checkpoint(const Network<float>& net, const std::filesystem::path& path);
Network<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace t3ar
