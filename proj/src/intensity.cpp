/*
 * (C) Copyright 2026 forestval developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#include "forestval/intensity.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "forestval/csv.hpp"
#include "forestval/errors.hpp"

namespace forestval {

namespace {

struct Period {
  int year = 0;
  int month = 0;  // 0 for yearly labels
};

bool digits(const std::string& s, std::size_t from, std::size_t n) {
  if (s.size() < from + n) return false;
  return std::all_of(s.begin() + from, s.begin() + from + n,
                     [](char c) { return c >= '0' && c <= '9'; });
}

bool parse_period(const std::string& s, Period& out) {
  if (s.size() == 4 && digits(s, 0, 4)) {
    out = {std::stoi(s), 0};
    return true;
  }
  if (s.size() == 7 && digits(s, 0, 4) && s[4] == '-' && digits(s, 5, 2)) {
    out = {std::stoi(s.substr(0, 4)), std::stoi(s.substr(5, 2))};
    return out.month >= 1 && out.month <= 12;
  }
  return false;
}

int ordinal(const Period& p) { return p.month == 0 ? p.year : p.year * 12 + (p.month - 1); }

std::string label(int ord, bool monthly) {
  if (!monthly) return fmt::format("{:04d}", ord);
  return fmt::format("{:04d}-{:02d}", ord / 12, ord % 12 + 1);
}

}  // namespace

std::int64_t DisasterCounts::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

void DisasterCounts::validate() const {
  if (counts.empty()) throw data_error("disaster counts: no periods");
  if (periods.size() != counts.size()) throw data_error("disaster counts: label/count mismatch");
  if (periods_per_year != 1 && periods_per_year != 12)
    throw data_error("disaster counts: periods per year must be 1 or 12");
  for (std::size_t k = 0; k < counts.size(); ++k)
    if (counts[k] < 0)
      throw data_error(fmt::format("disaster counts: negative count for {}", periods[k]));
}

DisasterCounts read_disaster_csv(const std::string& path, bool allow_gaps) {
  const auto lines = csv::read_lines(path);
  if (lines.empty() || lines.front().empty()) throw data_error(path + ": empty file");
  const auto header = csv::split(lines.front());
  if (header.size() != 2 || header[0] != "period" || header[1] != "count")
    throw data_error(path + ": header must be period,count");

  std::vector<std::pair<int, std::int64_t>> rows;
  int granularity = -1;  // 1 yearly, 12 monthly
  for (std::size_t row = 1; row < lines.size(); ++row) {
    if (lines[row].empty()) continue;
    const auto cells = csv::split(lines[row]);
    const std::size_t line_no = row + 1;
    if (cells.size() != 2)
      throw data_error(fmt::format("{}: row {} has {} columns, expected 2", path, line_no,
                                   cells.size()));
    Period p;
    if (!parse_period(cells[0], p))
      throw data_error(fmt::format("{}: row {}, column 'period': '{}' is not YYYY or YYYY-MM",
                                   path, line_no, cells[0]));
    const int g = p.month == 0 ? 1 : 12;
    if (granularity < 0) granularity = g;
    if (g != granularity)
      throw data_error(fmt::format("{}: row {}: mixed yearly and monthly periods", path, line_no));
    std::int64_t count = 0;
    const auto& c = cells[1];
    const auto [end, ec] = std::from_chars(c.data(), c.data() + c.size(), count);
    if (ec != std::errc{} || end != c.data() + c.size() || count < 0)
      throw data_error(fmt::format(
          "{}: row {}, column 'count': '{}' is not a nonnegative integer", path, line_no, c));
    rows.emplace_back(ordinal(p), count);
  }
  if (rows.empty()) throw data_error(path + ": no data rows");

  DisasterCounts out;
  out.periods_per_year = granularity;
  const bool monthly = granularity == 12;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (k > 0) {
      const int prev = rows[k - 1].first, cur = rows[k].first;
      if (cur <= prev)
        throw data_error(fmt::format("{}: period {} out of order or repeated", path,
                                     label(cur, monthly)));
      if (cur != prev + 1) {
        if (!allow_gaps)
          throw data_error(fmt::format("{}: gap between {} and {} (enable allow_gaps to treat "
                                       "missing periods as zero counts)",
                                       path, label(prev, monthly), label(cur, monthly)));
        for (int fill = prev + 1; fill < cur; ++fill) {
          out.periods.push_back(label(fill, monthly));
          out.counts.push_back(0);
        }
      }
    }
    out.periods.push_back(label(rows[k].first, monthly));
    out.counts.push_back(rows[k].second);
  }
  out.validate();
  return out;
}

void write_disaster_csv(const DisasterCounts& counts, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw data_error("cannot open " + path + " for writing");
  os << "period,count\n";
  for (std::size_t k = 0; k < counts.counts.size(); ++k)
    os << counts.periods[k] << ',' << counts.counts[k] << '\n';
}

IntensityEstimate estimate_intensity(const DisasterCounts& counts) {
  counts.validate();
  IntensityEstimate est;
  est.events = counts.total();
  est.years = counts.years();
  est.lambda = static_cast<double>(est.events) / est.years;
  est.se = std::sqrt(est.lambda / est.years);
  est.ci_lo = est.lambda - 1.96 * est.se;
  est.ci_hi = est.lambda + 1.96 * est.se;
  est.zero_events = est.events == 0;
  return est;
}

std::array<double, 2> lambda_ci_to_box_segment(const IntensityEstimate& est, double floor) {
  if (!(floor > 0.0)) throw usage_error("lambda floor must be positive");
  const double lo = std::max(est.lambda - 1.96 * est.se, floor);
  const double hi = std::max(est.lambda + 1.96 * est.se, lo);
  return {lo, hi};
}

}  // namespace forestval
