#pragma once

#include <stdexcept>
#include <string>

namespace tire {

// Error hierarchy shared by the library and the CLI.
// CLI exit codes: 0 ok, 2 config error, 3 data error, 4 numerical abort.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

// Invalid parameters, invariant violations in user-supplied configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

// Malformed or unreadable input files.
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

// Degenerate numeric input, NaN aborts.
class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

// Mismatched tensor/grid shapes and out-of-bounds coordinates.
class ShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace tire
