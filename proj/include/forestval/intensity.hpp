/*
 * (C) Copyright 2026 forestval developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace forestval {

/// Event counts per contiguous period (months or years).
struct DisasterCounts {
  std::vector<std::string> periods;
  std::vector<std::int64_t> counts;
  int periods_per_year = 12;

  double years() const { return static_cast<double>(counts.size()) / periods_per_year; }
  std::int64_t total() const;
  void validate() const;
};

/// Reads `period,count` with YYYY or YYYY-MM periods. Missing periods are an
/// error unless allow_gaps is set, in which case they are filled with zeros.
DisasterCounts read_disaster_csv(const std::string& path, bool allow_gaps = false);
void write_disaster_csv(const DisasterCounts& counts, const std::string& path);

struct IntensityEstimate {
  double lambda = 0.0;  // events/year
  double se = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;
  std::int64_t events = 0;
  double years = 0.0;
  bool zero_events = false;  // lambda = 0 violates the model's lambda > 0
};

/// Poisson MLE: events / years, SE from the Fisher information.
IntensityEstimate estimate_intensity(const DisasterCounts& counts);

/// 95% interval, lower end floored at `floor`.
std::array<double, 2> lambda_ci_to_box_segment(const IntensityEstimate& est,
                                               double floor = 1e-6);

}  // namespace forestval
