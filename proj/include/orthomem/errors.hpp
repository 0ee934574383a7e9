#pragma once

#include <stdexcept>
#include <string>

namespace orthomem {

/// Shape mismatch, out-of-range parameter, malformed input.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The exact polar factor is not unique (sigma_min below tolerance).
class RankDeficient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric has no value for the given input (empty mask, constant series).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// File could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace orthomem
