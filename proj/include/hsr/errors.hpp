#pragma once

#include <stdexcept>
#include <string>

namespace hsr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller broke an API precondition (dimension mismatch, empty list, bad id).
class UsageError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered, or a probability left its clamping window.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed or unusable input files.
class InputError : public Error {
 public:
  using Error::Error;
};

// Checkpoint and dataset (or config) disagree on shapes.
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace hsr
