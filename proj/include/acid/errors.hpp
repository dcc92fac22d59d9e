#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace acid {

// Dimension or length mismatch between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A value violates a documented precondition (non-finite entry, bad rate, ...).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The operator does not support the requested action (e.g. vjp on a
// non-differentiable operator, training a fixed operator).
class CapabilityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A non-finite intermediate appeared; `iteration` is the 1-based index of the
// update that produced it (0 for the initial image).
class DivergedError : public std::runtime_error {
 public:
  DivergedError(int iteration, const std::string& what)
      : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

// Attack ascent produced non-finite values; carries the objective trace so far.
class AttackAbortedError : public std::runtime_error {
 public:
  AttackAbortedError(const std::string& what, std::vector<double> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

// Malformed or invalid configuration. line/column are 1-based; 0 when the
// problem is not tied to a location (e.g. a missing key).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : std::runtime_error(format(what, line, column)), line_(line), column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& what, std::size_t line, std::size_t column) {
    if (line == 0) return what;
    return "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what;
  }
  std::size_t line_;
  std::size_t column_;
};

}  // namespace acid
