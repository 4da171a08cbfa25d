#pragma once

#include <stdexcept>
#include <string>

namespace owr {

// Raised for any violated precondition or malformed input. The CLI maps it
// to exit status 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace owr
