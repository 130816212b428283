#pragma once

#include <stdexcept>
#include <string>

namespace kerr {

/// Bad user input: parameters, configuration, or call preconditions.
class ValidationError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical or runtime failure during a simulation.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
}

}  // namespace kerr
