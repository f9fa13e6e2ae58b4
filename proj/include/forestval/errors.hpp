/*
 * (C) Copyright 2026 forestval developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace forestval {

/// Failure classes. The numeric values double as C API status codes and CLI
/// exit statuses.
enum class ErrorKind : int {
  Usage = 1,      // bad arguments, invalid configuration
  Data = 2,       // unreadable input, schema violations
  Numerical = 3,  // optimizer non-convergence, solver defects
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error usage_error(const std::string& msg) { return {ErrorKind::Usage, msg}; }
inline Error data_error(const std::string& msg) { return {ErrorKind::Data, msg}; }
inline Error numerical_error(const std::string& msg) {
  return {ErrorKind::Numerical, msg};
}

}  // namespace forestval
