#pragma once

#include <stdexcept>
#include <string>

namespace hsr {

// Contract violations on shapes, sizes and configuration values.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Unreadable, malformed or unsupported files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Solver non-convergence or non-finite values.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hsr
