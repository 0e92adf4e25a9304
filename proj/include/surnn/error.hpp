#pragma once

#include <stdexcept>
#include <string>

namespace surnn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments or an invalid combination of options.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data. `location` names the file/line or
// record the problem was found at, when known.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what, std::string location = {})
      : Error(location.empty() ? what : location + ": " + what),
        location_(std::move(location)) {}

  const std::string& location() const { return location_; }

 private:
  std::string location_;
};

// A NaN/Inf was produced where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace surnn
