// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>

#include "doakit/nn/doanet.hpp"

namespace doakit::nn {

/// Little-endian parameter file:
///
///   "DNPR"  magic
///   u32     format version
///   u32 n, n bytes   network config as text (NetworkConfig::to_text)
///   u32     block count
///   per block:
///     u32 n, n bytes   layer-qualified name, e.g. "sps/cnn1/conv/kernel"
///     u32 rank, rank x u32 dims
///     prod(dims) x float32
///   u32     CRC-32 (IEEE) of every preceding byte
void write_parameters(std::ostream& os, const NetworkParameters& params);
void write_parameters(const std::filesystem::path& path, const NetworkParameters& params);

/// Throws MissingInputError for absent files and FormatError for bad magic,
/// version, truncation or checksum mismatch.
NetworkParameters read_parameters(std::istream& is);
NetworkParameters read_parameters(const std::filesystem::path& path);

}  // namespace doakit::nn
