#pragma once

#include <stdexcept>
#include <string>

namespace advplace {

/// Malformed input, inconsistent configuration or a violated precondition.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The request is well formed but mathematically infeasible: the target is
/// not reachable, or an infinite-horizon series does not converge.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace advplace
