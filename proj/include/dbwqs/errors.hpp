#pragma once

#include <stdexcept>

namespace dbwqs {

// Invalid input data or run configuration; the CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sampler/inference failure (e.g. adaptation could not find a usable step
// size); the CLI maps this to exit code 3.
class InferenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dbwqs
