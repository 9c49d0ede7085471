#pragma once

#include <stdexcept>
#include <string>

namespace fourier {

/// Bad input to an operation (empty sequence, out-of-range id, bad ratio).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inconsistent model or run configuration. Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss or diverged computation. Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UndefinedCentroid : public std::domain_error {
 public:
  UndefinedCentroid() : std::domain_error("spectral centroid of an all-zero curve is undefined") {}
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

inline void require_config(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace detail
}  // namespace fourier
