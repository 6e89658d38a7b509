#pragma once

#include <stdexcept>
#include <string>

namespace t3ar {

/// Runtime or numerical failure. Maps to exit code 1 in the CLI.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments. Maps to exit code 2 in the CLI.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace t3ar
