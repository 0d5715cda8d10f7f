// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace doakit {

/// Little-endian float32 array file.
///
///   offset  size  field
///        0     4  magic (e.g. "DFEA" features, "DSPS" pseudo-spectrum,
///                 "DDOA" DOA targets)
///        4     4  format version (currently 1)
///        8     4  rows      (sequence length L, or frame count)
///       12     4  columns   (frequency bins, or grid size)
///       16     4  channels  (2C for features, 1 otherwise)
///       20     4  valid rows
///       24     .  rows * columns * channels float32, row-major
struct ContainerHeader {
  std::array<char, 4> magic{};
  std::uint32_t version = 1;
  std::uint32_t rows = 0;
  std::uint32_t columns = 0;
  std::uint32_t channels = 1;
  std::uint32_t valid_rows = 0;

  std::size_t element_count() const {
    return static_cast<std::size_t>(rows) * columns * channels;
  }
};

inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr std::string_view kFeatureMagic = "DFEA";
inline constexpr std::string_view kSpsMagic = "DSPS";
inline constexpr std::string_view kDoaMagic = "DDOA";

struct ContainerData {
  ContainerHeader header;
  std::vector<float> values;
};

void write_container(const std::filesystem::path& path, std::string_view magic, std::uint32_t rows,
                     std::uint32_t columns, std::uint32_t channels, std::uint32_t valid_rows,
                     std::span<const float> values);

/// Throws MissingInputError for absent files and FormatError when the magic,
/// version or payload size does not match.
ContainerData read_container(const std::filesystem::path& path, std::string_view expected_magic);

}  // namespace doakit
