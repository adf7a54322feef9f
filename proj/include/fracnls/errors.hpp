#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fracnls {

// Base class for everything thrown by the library. The CLI maps subclasses to
// exit codes: ValidationError -> 2, IoError -> 4, everything else -> 3.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Bad scalar argument or a violated parameter-regime inequality.
class ParameterError : public Error {
public:
  using Error::Error;
};

// Non-finite field values or mismatched grids.
class InvalidFieldError : public Error {
public:
  using Error::Error;
};

// Requested dilation magnitude beyond what the grid can resolve.
class ResolutionError : public Error {
public:
  using Error::Error;
};

// Exponential overflow while evaluating a fiber quantity; names the term.
class RangeError : public Error {
public:
  using Error::Error;
};

// Root bracketing failed: fiber or h geometry does not have the expected
// two-critical-point shape for the given inputs.
class GeometryError : public Error {
public:
  using Error::Error;
};

// An admissibility condition required by an operation does not hold.
class PreconditionError : public Error {
public:
  using Error::Error;
};

// Constant estimation did not stagnate within the iteration budget; carries
// the tail of the quotient trace for diagnosis.
class EstimationError : public Error {
public:
  EstimationError(const std::string& msg, std::vector<double> trace)
      : Error(msg), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

private:
  std::vector<double> trace_;
};

class IoError : public Error {
public:
  using Error::Error;
};

// One manifest problem: JSON pointer of the offending field plus a message.
struct ValidationIssue {
  std::string pointer;
  std::string message;
};

class ValidationError : public Error {
public:
  explicit ValidationError(std::vector<ValidationIssue> issues)
      : Error(format(issues)), issues_(std::move(issues)) {}
  const std::vector<ValidationIssue>& issues() const { return issues_; }

private:
  static std::string format(const std::vector<ValidationIssue>& issues) {
    std::string msg = "manifest validation failed:";
    for (const auto& it : issues) msg += "\n  " + it.pointer + ": " + it.message;
    return msg;
  }
  std::vector<ValidationIssue> issues_;
};

}  // namespace fracnls
