#pragma once

#include <stdexcept>
#include <string>

namespace rmt {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file (bad CSV row, bad snapshot, ...).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Column roles or file layout do not match what was declared.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An API contract was violated by the caller (shape mismatch,
/// reading a label the caller must not see, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A metric is undefined on the given input (single-class AUC, ...).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rmt
