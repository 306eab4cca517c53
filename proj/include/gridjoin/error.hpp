#pragma once

#include <stdexcept>
#include <string>

namespace gridjoin {

// Invalid inputs: missing or malformed files, bad arguments, violated
// preconditions. The CLI maps these to exit code 1.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failures: degenerate geometry, divergence, non-finite values.
// The CLI maps these to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gridjoin
