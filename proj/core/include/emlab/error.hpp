#pragma once

#include <stdexcept>
#include <string>

namespace emlab {

// Bad parameters, malformed grids, inadmissible combinations.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical self-check failed (contraction lost, bound violated, ...).
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace emlab
