/*
 * (C) Copyright 2026 forestval developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace forestval::csv {

/// Splits one line on commas and trims blanks. No quoting: none of the
/// schemas carry text fields with commas.
std::vector<std::string> split(std::string_view line);

/// Parses a finite double or throws a data error naming file, row and column.
double parse_number(const std::string& cell, const std::string& file, std::size_t row,
                    std::string_view column);

/// Reads all lines; strips a UTF-8 BOM and trailing '\r'.
std::vector<std::string> read_lines(const std::string& path);

/// Shortest round-trip text for a double.
std::string format(double v);

}  // namespace forestval::csv
