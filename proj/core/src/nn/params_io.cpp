// SPDX-License-Identifier: Apache-2.0
#include "doakit/nn/params_io.hpp"

#include <bit>
#include <boost/crc.hpp>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "doakit/errors.hpp"

static_assert(std::endian::native == std::endian::little, "parameter I/O assumes little-endian");

namespace doakit::nn {

namespace {

constexpr char kMagic[4] = {'D', 'N', 'P', 'R'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void text(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  void bytes(void* p, std::size_t n) {
    if (n > data_.size() - pos_) throw FormatError("parameter file is truncated");
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::string text() {
    const std::uint32_t n = u32();
    if (n > data_.size() - pos_) throw FormatError("parameter file is truncated");
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32(std::string_view data) {
  boost::crc_32_type crc;
  crc.process_bytes(data.data(), data.size());
  return crc.checksum();
}

}  // namespace

void write_parameters(std::ostream& os, const NetworkParameters& params) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(params.version);
  w.text(params.config.to_text());
  w.u32(static_cast<std::uint32_t>(params.blocks.size()));
  for (const auto& b : params.blocks) {
    w.text(b.name);
    w.u32(static_cast<std::uint32_t>(b.dims.size()));
    std::size_t count = 1;
    for (auto d : b.dims) {
      w.u32(static_cast<std::uint32_t>(d));
      count *= d;
    }
    if (count != b.values.size()) throw std::invalid_argument("parameter block '" + b.name + "' does not match its shape");
    w.bytes(b.values.data(), b.values.size() * sizeof(float));
  }
  const std::uint32_t crc = crc32(w.buffer());
  os.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  os.write(reinterpret_cast<const char*>(&crc), 4);
  if (!os) throw std::runtime_error("failed to write parameter file");
}

void write_parameters(const std::filesystem::path& path, const NetworkParameters& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_parameters(os, params);
}

NetworkParameters read_parameters(std::istream& is) {
  const std::string data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (data.size() < 16) throw FormatError("parameter file is truncated");
  if (std::memcmp(data.data(), kMagic, 4) != 0) throw FormatError("not a parameter file (bad magic)");
  const std::string_view body(data.data(), data.size() - 4);
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, data.data() + data.size() - 4, 4);
  if (crc32(body) != stored_crc) throw FormatError("parameter file checksum mismatch");

  Reader r(body);
  char magic[4];
  r.bytes(magic, 4);
  NetworkParameters p;
  p.version = r.u32();
  if (p.version != NetworkParameters::kVersion) {
    throw FormatError("unsupported parameter file version " + std::to_string(p.version));
  }
  try {
    p.config = parse_network_config(r.text());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("parameter file has an invalid network config: ") + e.what());
  }
  const std::uint32_t blocks = r.u32();
  for (std::uint32_t i = 0; i < blocks; ++i) {
    ParameterBlock b;
    b.name = r.text();
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw FormatError("parameter block '" + b.name + "' has implausible rank");
    std::size_t count = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      b.dims.push_back(r.u32());
      count *= b.dims.back();
    }
    if (count > r.remaining() / sizeof(float)) throw FormatError("parameter file is truncated");
    b.values.resize(count);
    r.bytes(b.values.data(), count * sizeof(float));
    p.blocks.push_back(std::move(b));
  }
  if (r.remaining() != 0) throw FormatError("parameter file has trailing bytes");
  return p;
}

NetworkParameters read_parameters(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingInputError("missing parameter file: " + path.string());
  return read_parameters(is);
}

}  // namespace doakit::nn
