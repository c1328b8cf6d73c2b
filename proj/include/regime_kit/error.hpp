#pragma once

#include <stdexcept>
#include <string>

namespace regime_kit {

/// Malformed or inconsistent input (files, configuration, preconditions).
class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A computation that cannot produce a defined result for valid-looking input.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace regime_kit
