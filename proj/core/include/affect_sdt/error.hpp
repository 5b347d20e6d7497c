#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace affect_sdt {

// Root of every error thrown by the library. Callers that only need to report
// a failure can catch this; the subclasses let the CLI map failures to exit
// codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input could not be parsed (bad CSV row, malformed JSON, short vector line).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Input parsed but violates a documented invariant. Carries every offender so
// a single run reports all of them.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::vector<std::string> offenders)
      : Error(what), offenders_(std::move(offenders)) {}

  const std::vector<std::string>& offenders() const noexcept { return offenders_; }

 private:
  std::vector<std::string> offenders_;
};

// Argument outside the mathematical domain of a function (probit of 1.0,
// mismatched shapes, negative transport cost).
class DomainError : public Error {
 public:
  using Error::Error;
};

// The computation is well-formed but undefined on this data: zero variance,
// constant ranks, singular covariance, empty representation.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Bad configuration: unknown keys, missing files, invalid grid.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace affect_sdt
