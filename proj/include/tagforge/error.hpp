#pragma once

#include <stdexcept>
#include <string>

namespace tagforge {

// Base for all fatal toolkit errors. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// File missing, unreadable, or unwritable.
class IoError : public Error {
 public:
  using Error::Error;
};

// Input violates a documented format or record contract.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Caller passed arguments that violate a precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// A model response could not be parsed. Retryable at the client layer.
class ParseFailure : public Error {
 public:
  using Error::Error;
};

// Endpoint rejected credentials. Never retried.
class AuthError : public Error {
 public:
  using Error::Error;
};

// Agreement statistic has an undefined denominator (expected agreement == 1).
class DegenerateAgreement : public Error {
 public:
  using Error::Error;
};

// A sampling phase cannot meet its target (coverage rate or subset size).
class SelectionError : public Error {
 public:
  using Error::Error;
};

// A counterfactual case has no eligible replacement and must be skipped.
class CaseSkipped : public Error {
 public:
  using Error::Error;
};

}  // namespace tagforge
