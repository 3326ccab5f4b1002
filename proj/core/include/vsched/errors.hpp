#pragma once

#include <stdexcept>
#include <string>

namespace vsched {

// Error hierarchy. The CLI maps each family to an exit code:
// usage → 2, validation/configuration → 3, everything else → 4.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments or flags supplied by a caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a documented schema or invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Structurally invalid configuration (zero horizon, no classes, ...).
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A schema violation located at a field of a structured-text document.
class SchemaError : public ValidationError {
 public:
  SchemaError(std::string field, int line, const std::string& what);
  const std::string& field() const noexcept { return field_; }
  int line() const noexcept { return line_; }

 private:
  std::string field_;
  int line_;
};

/// A value was requested outside its defined range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Evaluation point outside the domain of a barrier-type function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// No strictly feasible point could be constructed.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// An iterative method hit its iteration cap.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class StorageError : public Error {
 public:
  using Error::Error;
};

/// A worker evaluator failed on a prompt.
class EvaluationError : public Error {
 public:
  EvaluationError(std::string prompt_id, const std::string& what);
  const std::string& prompt_id() const noexcept { return prompt_id_; }

 private:
  std::string prompt_id_;
};

}  // namespace vsched
