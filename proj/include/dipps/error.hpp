#pragma once

#include <stdexcept>
#include <string>

namespace dipps {

// Failures caused by inputs (files, data, configuration). Recoverable at the
// CLI boundary, where they become a stage-tagged message and exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
  ParseError(const std::string& file, std::size_t line, const std::string& msg)
      : Error(file + ":" + std::to_string(line) + ": " + msg) {}
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

// A documented precondition was broken by the caller; a programming error,
// not a data error.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace dipps
