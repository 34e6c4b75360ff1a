#pragma once

#include <stdexcept>
#include <string>

namespace waveband {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
};

class DimensionTooSmall : public Error {
 public:
  using Error::Error;
};

class NotHermitian : public Error {
 public:
  using Error::Error;
};

class LinearSolveFailure : public Error {
 public:
  using Error::Error;
};

class InvalidRadius : public Error {
 public:
  using Error::Error;
};

class GridMismatch : public Error {
 public:
  using Error::Error;
};

class TopologyMismatch : public Error {
 public:
  using Error::Error;
};

class GapViolation : public Error {
 public:
  GapViolation(double x, double gap)
      : Error("band gap " + std::to_string(gap) + " below threshold at x = " + std::to_string(x)),
        x_(x),
        gap_(gap) {}
  double x() const { return x_; }
  double gap() const { return gap_; }

 private:
  double x_;
  double gap_;
};

class DegenerateBand : public Error {
 public:
  using Error::Error;
};

class AmbiguousHolonomy : public Error {
 public:
  using Error::Error;
};

class WeightNonPositive : public Error {
 public:
  using Error::Error;
};

class MetricDegenerate : public Error {
 public:
  using Error::Error;
};

class DegenerateMinimum : public Error {
 public:
  using Error::Error;
};

class NonPositiveError : public Error {
 public:
  using Error::Error;
};

// Raised for malformed scenario files. `line` is 1-based, 0 when unknown.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace waveband
