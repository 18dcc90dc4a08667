#pragma once

#include <stdexcept>
#include <string>

namespace metroplan {

// Every failure the library reports derives from Error. The CLI maps each
// class onto a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class ValidationError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

// Malformed input document; the message names the line or field.
class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InvalidState : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

// A masked-out node was passed to a transition.
class InvalidAction : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

// The exhaustive oracle refused an instance that exceeds its size guard.
class GuardRefusal : public Error {
 public:
  GuardRefusal(const std::string& what, double estimate)
      : Error(what), estimate_(estimate) {}
  int exit_code() const noexcept override { return 5; }
  double estimate() const noexcept { return estimate_; }

 private:
  double estimate_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace metroplan
