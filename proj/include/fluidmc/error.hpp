#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fluidmc {

/// Base of every error raised by the library.
///
/// Errors split into two families that the CLI maps onto exit codes:
/// InputError (bad model, formula or arguments, exit 2) and NumericError
/// (integration or linear-algebra failure, exit 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ParseError : public InputError {
 public:
  ParseError(const std::string& msg, std::size_t line, std::size_t column)
      : InputError(std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class UnknownIdentifier : public InputError {
 public:
  explicit UnknownIdentifier(std::string name)
      : InputError("UnknownIdentifier(\"" + name + "\")"), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class DuplicateName : public InputError {
 public:
  explicit DuplicateName(const std::string& name) : InputError("DuplicateName(\"" + name + "\")") {}
};

class InvalidModel : public InputError {
 public:
  using InputError::InputError;
};

class MultiplicityUnsupported : public InputError {
 public:
  explicit MultiplicityUnsupported(const std::string& transition)
      : InputError("MultiplicityUnsupported: transition '" + transition +
                   "' has a rule with multiplicity > 1") {}
};

class NestedFormulaUnsupported : public InputError {
 public:
  using InputError::InputError;
};

class StateSpaceTooLarge : public InputError {
 public:
  StateSpaceTooLarge(std::size_t size, std::size_t cap)
      : InputError("StateSpaceTooLarge: " + std::to_string(size) + " states exceeds cap " +
                   std::to_string(cap)) {}
};

class NegativeRate : public NumericError {
 public:
  NegativeRate(const std::string& transition, double value, std::vector<double> x);
  const std::vector<double>& point() const noexcept { return x_; }

 private:
  std::vector<double> x_;
};

class NonFiniteRate : public NumericError {
 public:
  NonFiniteRate(const std::string& transition, std::vector<double> x);
  const std::vector<double>& point() const noexcept { return x_; }

 private:
  std::vector<double> x_;
};

class NonGenerator : public NumericError {
 public:
  using NumericError::NumericError;
};

class StepSizeUnderflow : public NumericError {
 public:
  StepSizeUnderflow(double t, std::vector<double> state);
  double time() const noexcept { return t_; }
  const std::vector<double>& state() const noexcept { return state_; }

 private:
  double t_;
  std::vector<double> state_;
};

class NoConvergence : public NumericError {
 public:
  NoConvergence(double t_limit, double residual);
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class NonUniqueInvariantMeasure : public NumericError {
 public:
  NonUniqueInvariantMeasure(std::vector<std::vector<double>> per_class);
  /// One invariant measure (over all agent states) per closed class.
  const std::vector<std::vector<double>>& class_measures() const noexcept { return measures_; }

 private:
  std::vector<std::vector<double>> measures_;
};

}  // namespace fluidmc
