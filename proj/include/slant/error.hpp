#pragma once

#include <stdexcept>
#include <string>

namespace slant {

// Runtime failure inside a pipeline stage (bad data, numerical breakdown).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or arguments; the CLI maps this to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace slant
