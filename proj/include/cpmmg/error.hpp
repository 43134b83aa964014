#pragma once

#include <stdexcept>
#include <string>

namespace cpmmg {

/// Invalid input: malformed case file, dangling references, bad flags.
/// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure while simulating (e.g. congestion loop did not settle).
/// The CLI maps this to exit code 2.
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cpmmg
