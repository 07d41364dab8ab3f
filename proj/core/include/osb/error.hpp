#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace osb {

/// Base class for every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments or configuration values supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed, inconsistent, or missing input data. Carries the 1-based row
/// (record) number when the problem can be pinned to one.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what, std::optional<std::size_t> row = std::nullopt)
      : Error(row ? "row " + std::to_string(*row) + ": " + what : what), row_(row) {}

  std::optional<std::size_t> row() const noexcept { return row_; }

 private:
  std::optional<std::size_t> row_;
};

/// NaN, infinity, or divergence detected during a computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace osb
