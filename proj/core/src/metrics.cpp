// SPDX-License-Identifier: Apache-2.0
#include "doakit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "doakit/dataset.hpp"
#include "doakit/errors.hpp"

namespace doakit {
namespace {

double snr_db(double reference_energy, double error_energy) {
  if (error_energy <= 0.0 || reference_energy / error_energy > 1e14) return kSnrCapDb;
  if (reference_energy <= 0.0) return -kSnrCapDb;
  return std::clamp(10.0 * std::log10(reference_energy / error_energy), -kSnrCapDb, kSnrCapDb);
}

void check_aligned(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("estimates and truth cover different frame counts");
}

std::string format_optional(const std::optional<double>& v, int precision) {
  if (!v) return "nan";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << *v;
  return os.str();
}

}  // namespace

double sps_snr(const PseudoSpectrum& estimated, const PseudoSpectrum& reference) {
  if (estimated.frames != reference.frames || estimated.directions != reference.directions ||
      estimated.values.size() != reference.values.size()) {
    throw std::invalid_argument("SPS shapes differ");
  }
  double ref = 0.0, err = 0.0;
  for (std::size_t i = 0; i < reference.values.size(); ++i) {
    const double r = reference.values[i];
    const double e = static_cast<double>(estimated.values[i]) - r;
    ref += r * r;
    err += e * e;
  }
  return snr_db(ref, err);
}

std::vector<int> hungarian(std::span<const double> cost, std::size_t rows, std::size_t cols) {
  if (cost.size() != rows * cols) throw std::invalid_argument("cost matrix size mismatch");
  std::vector<int> result(rows, -1);
  if (rows == 0 || cols == 0) return result;
  // The potential method below needs n <= m. Zero padding to a square
  // matrix does not change the optimum, so the short side is simply matched
  // into the long one; a tall matrix is solved transposed.
  const bool transposed = rows > cols;
  const std::size_t n = transposed ? cols : rows, m = transposed ? rows : cols;
  auto a = [&](std::size_t i, std::size_t j) -> double {  // 1-based
    return transposed ? cost[(j - 1) * cols + (i - 1)] : cost[(i - 1) * cols + (j - 1)];
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] == 0) continue;
    if (transposed) {
      result[j - 1] = static_cast<int>(p[j] - 1);
    } else {
      result[p[j] - 1] = static_cast<int>(j - 1);
    }
  }
  return result;
}

DoaMatch match_doas(std::span<const Direction> estimated, std::span<const Direction> truth) {
  DoaMatch m;
  const std::size_t rows = estimated.size(), cols = truth.size();
  if (rows == 0 || cols == 0) return m;
  std::vector<double> cost(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) cost[i * cols + j] = angular_distance(estimated[i], truth[j]);
  }
  const auto assign = hungarian(cost, rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (assign[i] < 0) continue;
    m.pairs.emplace_back(i, static_cast<std::size_t>(assign[i]));
    m.total_cost_deg += cost[i * cols + static_cast<std::size_t>(assign[i])];
  }
  return m;
}

std::optional<double> doa_error(std::span<const std::vector<Direction>> estimated,
                                std::span<const std::vector<Direction>> truth) {
  EvalAccumulator acc;
  acc.add_doa(estimated, truth);
  if (acc.estimates == 0) return std::nullopt;
  return acc.matched_cost / static_cast<double>(acc.estimates);
}

double frame_recall(std::span<const std::vector<Direction>> estimated,
                    std::span<const std::vector<Direction>> truth) {
  check_aligned(estimated.size(), truth.size());
  if (truth.empty()) return 100.0;
  std::size_t ok = 0;
  for (std::size_t t = 0; t < truth.size(); ++t) ok += estimated[t].size() == truth[t].size();
  return 100.0 * static_cast<double>(ok) / static_cast<double>(truth.size());
}

std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const std::vector<Direction>> estimated,
                                                       std::span<const std::vector<Direction>> truth,
                                                       std::size_t max_count) {
  check_aligned(estimated.size(), truth.size());
  std::vector<std::vector<std::size_t>> m(max_count + 1, std::vector<std::size_t>(max_count + 1, 0));
  for (std::size_t t = 0; t < truth.size(); ++t) {
    ++m[std::min(truth[t].size(), max_count)][std::min(estimated[t].size(), max_count)];
  }
  return m;
}

EvalAccumulator::EvalAccumulator(std::size_t max_count_)
    : max_count(max_count_), confusion(max_count_ + 1, std::vector<std::size_t>(max_count_ + 1, 0)) {}

void EvalAccumulator::add_doa(std::span<const std::vector<Direction>> estimated,
                              std::span<const std::vector<Direction>> truth) {
  check_aligned(estimated.size(), truth.size());
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (!estimated[t].empty()) {
      matched_cost += match_doas(estimated[t], truth[t]).total_cost_deg;
      estimates += estimated[t].size();
    }
    correct_count_frames += estimated[t].size() == truth[t].size();
    ++confusion[std::min(truth[t].size(), max_count)][std::min(estimated[t].size(), max_count)];
  }
  frames += truth.size();
}

void EvalAccumulator::add_sps(const PseudoSpectrum& estimated, const PseudoSpectrum& reference) {
  if (estimated.values.size() != reference.values.size() || estimated.directions != reference.directions) {
    throw std::invalid_argument("SPS shapes differ");
  }
  for (std::size_t i = 0; i < reference.values.size(); ++i) {
    const double r = reference.values[i];
    const double e = static_cast<double>(estimated.values[i]) - r;
    sps_reference_energy += r * r;
    sps_error_energy += e * e;
  }
  has_sps = true;
}

void EvalAccumulator::merge(const EvalAccumulator& o) {
  if (o.max_count != max_count) throw std::invalid_argument("cannot merge accumulators of different shape");
  matched_cost += o.matched_cost;
  estimates += o.estimates;
  frames += o.frames;
  correct_count_frames += o.correct_count_frames;
  sps_reference_energy += o.sps_reference_energy;
  sps_error_energy += o.sps_error_energy;
  has_sps = has_sps || o.has_sps;
  for (std::size_t i = 0; i <= max_count; ++i) {
    for (std::size_t j = 0; j <= max_count; ++j) confusion[i][j] += o.confusion[i][j];
  }
}

EvalReport EvalReport::from(const EvalAccumulator& acc, std::string dataset, std::string method) {
  EvalReport r;
  r.dataset = std::move(dataset);
  r.method = std::move(method);
  if (acc.has_sps) r.sps_snr_db = snr_db(acc.sps_reference_energy, acc.sps_error_energy);
  if (acc.estimates > 0) r.doa_error_deg = acc.matched_cost / static_cast<double>(acc.estimates);
  r.frame_recall_pct =
      acc.frames ? 100.0 * static_cast<double>(acc.correct_count_frames) / static_cast<double>(acc.frames) : 100.0;
  r.confusion = acc.confusion;
  r.frames_evaluated = acc.frames;
  r.estimates = acc.estimates;
  return r;
}

void write_report_csv(std::ostream& os, std::span<const EvalReport> reports) {
  os << "dataset,method,sps_snr_db,doa_error_deg,frame_recall_pct,frames,estimates,confusion\n";
  for (const auto& r : reports) {
    std::ostringstream conf;
    for (std::size_t i = 0; i < r.confusion.size(); ++i) {
      if (i) conf << ';';
      for (std::size_t j = 0; j < r.confusion[i].size(); ++j) conf << (j ? " " : "") << r.confusion[i][j];
    }
    os << r.dataset << ',' << r.method << ',' << format_optional(r.sps_snr_db, 4) << ','
       << format_optional(r.doa_error_deg, 4) << ',' << std::fixed << std::setprecision(4)
       << r.frame_recall_pct << ',' << r.frames_evaluated << ',' << r.estimates << ',' << conf.str() << '\n';
    os.unsetf(std::ios::floatfield);
  }
}

std::vector<EvalReport> read_report_csv(std::istream& is) {
  std::string line;
  std::getline(is, line);
  if (line != "dataset,method,sps_snr_db,doa_error_deg,frame_recall_pct,frames,estimates,confusion") {
    throw FormatError("unexpected report header");
  }
  auto opt = [](const std::string& s) -> std::optional<double> {
    if (s == "nan") return std::nullopt;
    return std::stod(s);
  };
  std::vector<EvalReport> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 8) throw FormatError("malformed report row: " + line);
    EvalReport r;
    r.dataset = f[0];
    r.method = f[1];
    r.sps_snr_db = opt(f[2]);
    r.doa_error_deg = opt(f[3]);
    r.frame_recall_pct = std::stod(f[4]);
    r.frames_evaluated = std::stoul(f[5]);
    r.estimates = std::stoul(f[6]);
    std::istringstream rows(f[7]);
    std::string row;
    while (std::getline(rows, row, ';')) {
      std::istringstream cells(row);
      std::vector<std::size_t> v;
      std::size_t x;
      while (cells >> x) v.push_back(x);
      r.confusion.push_back(v);
    }
    out.push_back(r);
  }
  return out;
}

void write_report_table(std::ostream& os, std::span<const EvalReport> reports) {
  std::vector<std::string> datasets, methods;
  std::map<std::pair<std::string, std::string>, const EvalReport*> cell;
  for (const auto& r : reports) {
    if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end()) datasets.push_back(r.dataset);
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    cell[{r.dataset, r.method}] = &r;
  }
  const int label_w = 34, col_w = 12;
  auto row = [&](const std::string& label, auto value) {
    os << std::left << std::setw(label_w) << label << std::right;
    for (const auto& d : datasets) os << std::setw(col_w) << value(d);
    os << '\n';
  };
  auto get = [&](const std::string& d, const std::string& m) -> const EvalReport* {
    auto it = cell.find({d, m});
    return it == cell.end() ? nullptr : it->second;
  };
  auto rule = [&] { os << std::string(label_w + col_w * datasets.size(), '-') << '\n'; };

  row("Dataset", [](const std::string& d) { return d; });
  rule();
  const std::string thr = "DOAnet-threshold";
  const bool has_net = std::find(methods.begin(), methods.end(), thr) != methods.end();
  if (has_net) {
    row("SPS SNR (dB)", [&](const std::string& d) {
      const auto* r = get(d, thr);
      return r ? format_optional(r->sps_snr_db, 2) : std::string("-");
    });
    os << "\nDOA error, unknown number of sources (threshold 0.5)\n";
    rule();
    row("DOAnet", [&](const std::string& d) {
      const auto* r = get(d, thr);
      return r ? format_optional(r->doa_error_deg, 2) : std::string("-");
    });
    row("Correctly predicted frames (%)", [&](const std::string& d) {
      const auto* r = get(d, thr);
      return r ? format_optional(r->frame_recall_pct, 1) : std::string("-");
    });
  }
  os << "\nDOA error, known number of sources\n";
  rule();
  for (const auto& m : methods) {
    if (m == thr) continue;
    const std::string label = m == "DOAnet-top-o" ? "DOAnet" : m;
    row(label, [&](const std::string& d) {
      const auto* r = get(d, m);
      return r ? format_optional(r->doa_error_deg, 2) : std::string("-");
    });
  }
  for (const auto& r : reports) {
    if (r.method != thr) continue;
    os << "\nConfusion matrix (rows: true count, columns: estimated count), " << r.dataset << '\n';
    for (const auto& rr : r.confusion) {
      for (std::size_t j = 0; j < rr.size(); ++j) os << std::setw(8) << rr[j];
      os << '\n';
    }
  }
}

}  // namespace doakit
