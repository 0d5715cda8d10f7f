// SPDX-License-Identifier: Apache-2.0
#include "doakit/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "doakit/errors.hpp"

namespace doakit {

static_assert(std::endian::native == std::endian::little, "container I/O assumes little-endian");

void write_container(const std::filesystem::path& path, std::string_view magic, std::uint32_t rows,
                     std::uint32_t columns, std::uint32_t channels, std::uint32_t valid_rows,
                     std::span<const float> values) {
  if (magic.size() != 4) throw std::invalid_argument("container magic must be 4 bytes");
  if (values.size() != static_cast<std::size_t>(rows) * columns * channels) {
    throw std::invalid_argument("container payload does not match its shape");
  }
  if (valid_rows > rows) throw std::invalid_argument("valid rows exceed rows");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  const std::uint32_t fields[5] = {kContainerVersion, rows, columns, channels, valid_rows};
  os.write(magic.data(), 4);
  os.write(reinterpret_cast<const char*>(fields), sizeof(fields));
  os.write(reinterpret_cast<const char*>(values.data()),
           static_cast<std::streamsize>(values.size_bytes()));
  if (!os) throw std::runtime_error("short write: " + path.string());
}

ContainerData read_container(const std::filesystem::path& path, std::string_view expected_magic) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingInputError("cannot open " + path.string());
  ContainerData out;
  std::uint32_t fields[5];
  is.read(out.header.magic.data(), 4);
  is.read(reinterpret_cast<char*>(fields), sizeof(fields));
  if (!is) throw FormatError("truncated container header: " + path.string());
  if (std::string_view(out.header.magic.data(), 4) != expected_magic) {
    throw FormatError("unexpected magic in " + path.string() + " (expected " +
                      std::string(expected_magic) + ")");
  }
  if (fields[0] != kContainerVersion) {
    throw FormatError("unsupported container version " + std::to_string(fields[0]) + " in " +
                      path.string());
  }
  out.header.version = fields[0];
  out.header.rows = fields[1];
  out.header.columns = fields[2];
  out.header.channels = fields[3];
  out.header.valid_rows = fields[4];
  out.values.resize(out.header.element_count());
  is.read(reinterpret_cast<char*>(out.values.data()),
          static_cast<std::streamsize>(out.values.size() * sizeof(float)));
  if (!is || is.peek() != std::char_traits<char>::eof()) {
    throw FormatError("container payload size mismatch: " + path.string());
  }
  return out;
}

}  // namespace doakit
