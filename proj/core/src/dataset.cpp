// SPDX-License-Identifier: Apache-2.0
#include "doakit/dataset.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "doakit/errors.hpp"

namespace doakit {
namespace {

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw MissingInputError("cannot open " + path.string());
  return is;
}

void expect_header(std::istream& is, const std::string& header, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(is, line) || line != header) {
    throw FormatError("unexpected header in " + path.string() + ": '" + line + "'");
  }
}

constexpr const char* kSceneHeader =
    "event_id,class,onset_s,duration_s,azimuth_deg,elevation_deg,distance_m";
constexpr const char* kManifestHeader = "name,split,subset,context,max_overlap,room,audio,metadata";

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

void write_scene_csv(const std::filesystem::path& path, const SceneSpec& spec) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << kSceneHeader << '\n' << std::setprecision(12);
  for (const auto& ev : spec.events) {
    os << ev.example_id << ',' << ev.class_name << ',' << ev.onset_s(spec.sample_rate) << ','
       << ev.duration_s(spec.sample_rate) << ',' << ev.direction.azimuth_deg() << ','
       << ev.direction.elevation_deg() << ',' << ev.distance_m << '\n';
  }
}

std::vector<SoundEvent> read_scene_csv(const std::filesystem::path& path, int fs) {
  auto is = open_or_throw(path);
  expect_header(is, kSceneHeader, path);
  std::vector<SoundEvent> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw FormatError("malformed row in " + path.string() + ": " + line);
    SoundEvent ev;
    ev.example_id = f[0];
    ev.class_name = f[1];
    ev.onset_sample = static_cast<std::size_t>(std::llround(std::stod(f[2]) * fs));
    ev.length_samples = static_cast<std::size_t>(std::llround(std::stod(f[3]) * fs));
    ev.direction = Direction(std::stod(f[4]), std::stod(f[5]));
    ev.distance_m = std::stod(f[6]);
    out.push_back(ev);
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << kManifestHeader << '\n';
  for (const auto& e : entries) {
    os << e.name << ',' << e.split << ',' << e.subset << ',' << to_string(e.context) << ','
       << e.max_overlap << ',' << e.room << ',' << e.audio << ',' << e.metadata << '\n';
  }
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  auto is = open_or_throw(path);
  expect_header(is, kManifestHeader, path);
  std::vector<ManifestEntry> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 8) throw FormatError("malformed manifest row: " + line);
    ManifestEntry e;
    e.name = f[0];
    e.split = std::stoi(f[1]);
    e.subset = f[2];
    e.context = parse_context(f[3]);
    e.max_overlap = std::stoi(f[4]);
    e.room = std::stoi(f[5]);
    e.audio = f[6];
    e.metadata = f[7];
    out.push_back(e);
  }
  return out;
}

std::string dataset_tag(Context context, int max_overlap, int room) {
  std::string tag = "O" + std::to_string(max_overlap) + (context == Context::kAnechoic ? "A" : "R");
  if (context == Context::kReverberant && room > 1) tag += "_room" + std::to_string(room);
  return tag;
}

}  // namespace doakit
