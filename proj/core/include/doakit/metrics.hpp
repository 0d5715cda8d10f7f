// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "doakit/geometry.hpp"
#include "doakit/subspace.hpp"

namespace doakit {

/// Directions estimated for one frame.
struct DoaFrameEstimate {
  std::size_t frame = 0;
  std::vector<Direction> directions;
};

inline constexpr double kSnrCapDb = 140.0;

/// 10 log10(sum ref^2 / sum (est - ref)^2) over all frames and directions,
/// clamped to [-140, 140] dB.
double sps_snr(const PseudoSpectrum& estimated, const PseudoSpectrum& reference);

/// Minimum-cost assignment on an m x n cost matrix (row-major). Returns, for
/// every row, the assigned column or -1 when m > n leaves the row
/// unmatched. Potential-based Hungarian method, O(k^2 K) for k = min(m, n)
/// and K = max(m, n); the result is optimal for the zero-padded square
/// problem.
std::vector<int> hungarian(std::span<const double> cost, std::size_t rows, std::size_t cols);

struct DoaMatch {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (estimate, truth)
  double total_cost_deg = 0.0;
};

/// Minimum total central angle over min(m, n) estimate/truth pairs.
/// Unmatched directions contribute no angular cost.
DoaMatch match_doas(std::span<const Direction> estimated, std::span<const Direction> truth);

/// Sum of matched costs over frames divided by the total number of
/// estimates; std::nullopt when nothing was estimated.
std::optional<double> doa_error(std::span<const std::vector<Direction>> estimated,
                                std::span<const std::vector<Direction>> truth);

/// Percentage of frames where |estimated| == |truth|.
double frame_recall(std::span<const std::vector<Direction>> estimated,
                    std::span<const std::vector<Direction>> truth);

/// (max_count + 1) x (max_count + 1) matrix, entry (i, j) counts frames with
/// i true and j estimated directions (counts clipped to max_count).
std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const std::vector<Direction>> estimated,
                                                       std::span<const std::vector<Direction>> truth,
                                                       std::size_t max_count);

/// Running totals from which dataset-level metrics are formed. Adding
/// recordings in any order gives the same report.
struct EvalAccumulator {
  double matched_cost = 0.0;
  std::size_t estimates = 0;
  std::size_t frames = 0;
  std::size_t correct_count_frames = 0;
  double sps_reference_energy = 0.0;
  double sps_error_energy = 0.0;
  bool has_sps = false;
  std::size_t max_count = 3;
  std::vector<std::vector<std::size_t>> confusion;

  explicit EvalAccumulator(std::size_t max_count = 3);
  void add_doa(std::span<const std::vector<Direction>> estimated,
               std::span<const std::vector<Direction>> truth);
  void add_sps(const PseudoSpectrum& estimated, const PseudoSpectrum& reference);
  void merge(const EvalAccumulator& other);
};

struct EvalReport {
  std::string dataset;  // e.g. "O1A"
  std::string method;   // e.g. "MUSIC", "DOAnet-threshold", "DOAnet-top-o"
  std::optional<double> sps_snr_db;
  std::optional<double> doa_error_deg;
  double frame_recall_pct = 0.0;
  std::vector<std::vector<std::size_t>> confusion;
  std::size_t frames_evaluated = 0;
  std::size_t estimates = 0;

  static EvalReport from(const EvalAccumulator& acc, std::string dataset, std::string method);
};

/// dataset,method,sps_snr_db,doa_error_deg,frame_recall_pct,frames,estimates,confusion
/// Undefined values are written as "nan"; the confusion matrix is written
/// as rows joined by ';' and entries by ' '.
void write_report_csv(std::ostream& os, std::span<const EvalReport> reports);
std::vector<EvalReport> read_report_csv(std::istream& is);

/// Text summary laid out like a results table: one column per dataset, rows
/// for SPS SNR, thresholded DOA error and recall, and the known-count DOA
/// errors for every method; confusion matrices follow.
void write_report_table(std::ostream& os, std::span<const EvalReport> reports);

}  // namespace doakit
