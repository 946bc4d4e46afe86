#pragma once

#include <stdexcept>
#include <string>

namespace lshed {

/// Argument outside the mathematical domain of an operation (negative power,
/// criticality outside [0,1], ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The requested shed amount exceeds the available load.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A scenario violates one of the modelling assumptions. `assumption()` names
/// it, e.g. "Assumption 1" or "ramp width inequality".
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string assumption, const std::string& what)
      : std::runtime_error(assumption + ": " + what), assumption_(std::move(assumption)) {}

  const std::string& assumption() const noexcept { return assumption_; }

 private:
  std::string assumption_;
};

/// Malformed scenario text. Line and column are 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : std::runtime_error(what), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace lshed
