#pragma once

#include <stdexcept>
#include <string>

namespace drnd {

// Base for every error raised by the library. Callers that only care about
// "something went wrong in drnd" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid construction parameters (layer dims, ensemble size, alpha range...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Vector or matrix sizes that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf detected where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Ensemble whose targets agree at a point, so the pseudo-count ratio is
// undefined.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// API misuse (stepping a finished episode, empty inputs...).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Files that cannot be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace drnd
