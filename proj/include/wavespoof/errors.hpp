#pragma once

#include <stdexcept>
#include <string>

namespace wavespoof {

/// Bad argument, shape mismatch, or otherwise malformed input.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A query point does not lie inside the meshed domain.
class OutOfDomain : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Factorization failure, non-finite intermediate, or similar.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent pipeline configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An upstream artifact is absent or was produced under a different config.
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wavespoof
