#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fdia {

/// Violated precondition of a public operation (bad dimensions, out-of-range argument).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Base class for problems with case-file input.
class CaseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public CaseError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : CaseError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class StructureError : public CaseError {
 public:
  using CaseError::CaseError;
};

class ValidationError : public CaseError {
 public:
  using CaseError::CaseError;
};

/// The network cannot produce a usable measurement model.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No nontrivial state attack exists that is zero off the requested support.
class InfeasibleAttackError : public GenerationError {
 public:
  using GenerationError::GenerationError;
};

class DiagnosticError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fdia
