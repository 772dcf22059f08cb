#pragma once

#include <stdexcept>
#include <string>

namespace rbsos {

// The conic solver stopped without a verdict (iteration cap or breakdown).
class IndeterminateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An enumeration or basis would exceed its configured cap.
class CapExceededError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// A supposedly compact uncertainty set admits an unbounded linear objective.
class UnboundedSetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rbsos
