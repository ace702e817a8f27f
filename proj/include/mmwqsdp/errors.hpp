#pragma once

#include <stdexcept>
#include <string>

namespace mmwqsdp {

// Base for every error raised by the library. exit_code() is what the CLI
// returns when the error escapes a subcommand.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

class UsageError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class ContractViolation : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class NumericFailure : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class ResourceError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

class LearnerFailure : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

}  // namespace mmwqsdp
