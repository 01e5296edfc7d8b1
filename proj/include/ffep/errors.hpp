#pragma once

#include <stdexcept>
#include <string>

namespace ffep {

// Caller violated a precondition (dimension mismatch, bad option value).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input data could not be loaded or interpreted.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A Gaussian with a nonnegative quadratic coefficient was used where a
// normalizable density is required.
class ImproperGaussianError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Moments that no Gaussian can reproduce. coordinate() is -1 when the mass
// itself is invalid, otherwise the 0-based offending coordinate.
class MomentMatchError : public std::domain_error {
 public:
  MomentMatchError(const std::string& what, long coordinate)
      : std::domain_error(what), coordinate_(coordinate) {}
  long coordinate() const noexcept { return coordinate_; }

 private:
  long coordinate_;
};

// A factor-approximation scheme could not produce a message.
class SchemeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An offline reference solver did not converge.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ffep
