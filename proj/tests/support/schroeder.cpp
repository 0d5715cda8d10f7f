// SPDX-License-Identifier: Apache-2.0
#include "schroeder.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace doakit::testing {

DecayFit schroeder_t60(std::span<const float> response, int sample_rate, double upper_db, double lower_db) {
  if (response.empty()) throw std::invalid_argument("schroeder: empty response");
  std::vector<double> edc(response.size());
  double acc = 0.0;
  for (std::size_t i = response.size(); i-- > 0;) {
    acc += static_cast<double>(response[i]) * response[i];
    edc[i] = acc;
  }
  if (acc <= 0.0) throw std::invalid_argument("schroeder: silent response");

  // Regression of level (dB) on time across the samples inside the range.
  double n = 0, st = 0, sl = 0, stt = 0, stl = 0, sll = 0;
  for (std::size_t i = 0; i < edc.size(); ++i) {
    const double level = 10.0 * std::log10(edc[i] / acc);
    if (level > upper_db) continue;
    if (level < lower_db) break;
    const double t = static_cast<double>(i) / sample_rate;
    n += 1;
    st += t;
    sl += level;
    stt += t * t;
    stl += t * level;
    sll += level * level;
  }
  if (n < 3) throw std::invalid_argument("schroeder: decay range not covered by the response");
  const double cov = stl - st * sl / n, var_t = stt - st * st / n, var_l = sll - sl * sl / n;
  DecayFit fit;
  fit.slope_db_per_s = cov / var_t;
  fit.t60_s = -60.0 / fit.slope_db_per_s;
  fit.r2 = var_l > 0 ? cov * cov / (var_t * var_l) : 1.0;
  return fit;
}

}  // namespace doakit::testing
