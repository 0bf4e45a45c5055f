#pragma once

#include <stdexcept>
#include <string>

namespace qbattery {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed argument: out-of-range site, mismatched sizes, bad parameter.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Operator or state larger than the dense-simulation limit.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Matrix or operator expected to be Hermitian is not.
class NotHermitian : public Error {
 public:
  using Error::Error;
};

/// The highest eigenvalue is (numerically) degenerate, so |E_max> is not unique.
class DegenerateTop : public Error {
 public:
  DegenerateTop(double gap, double tol)
      : Error("highest energy level is degenerate: gap " + std::to_string(gap) +
              " < tolerance " + std::to_string(tol)),
        gap_(gap) {}
  double gap() const noexcept { return gap_; }

 private:
  double gap_;
};

/// The lowest eigenvalue is degenerate (ground-state protocol only).
class DegenerateBottom : public Error {
 public:
  DegenerateBottom(double gap, double tol)
      : Error("lowest energy level is degenerate: gap " + std::to_string(gap) +
              " < tolerance " + std::to_string(tol)),
        gap_(gap) {}
  double gap() const noexcept { return gap_; }

 private:
  double gap_;
};

/// A measurement branch has zero probability and cannot be normalized.
class ZeroBranch : public Error {
 public:
  explicit ZeroBranch(double prob)
      : Error("measurement branch has vanishing probability " + std::to_string(prob)),
        prob_(prob) {}
  double probability() const noexcept { return prob_; }

 private:
  double prob_;
};

/// xi = eta = 0: the optimal rotation angle is undefined.
class DegenerateAngle : public Error {
 public:
  DegenerateAngle() : Error("xi and eta both vanish; the optimal angle is undefined") {}
};

/// A structural protocol precondition (commutation, uniqueness, entanglement) fails.
class PreconditionFailed : public Error {
 public:
  using Error::Error;
};

/// Text input could not be parsed.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace qbattery
