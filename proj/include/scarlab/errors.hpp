#pragma once

#include <stdexcept>
#include <string>

namespace scarlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Site count, dimension or operator size out of the supported range.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Operation requested on the wrong Hilbert-space sector (Full vs Constrained).
class SectorError : public Error {
 public:
  using Error::Error;
};

/// A named state pattern does not fit the lattice it was requested on.
class IncompatibleStateError : public Error {
 public:
  using Error::Error;
};

/// Invalid numerical parameter (negative disorder, bad grid, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Two objects that must live on the same basis do not.
class BasisMismatchError : public Error {
 public:
  using Error::Error;
};

/// Peak search window contains no samples.
class WindowError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}

  /// Error estimate reached before giving up.
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace scarlab
