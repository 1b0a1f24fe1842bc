#pragma once

#include <stdexcept>
#include <string>

namespace hteval {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Input file could not be read or parsed.
class LoadError : public Error {
  public:
    using Error::Error;
};

/// A value violates a documented invariant (bad schema, bad weights, ...).
class InvariantError : public Error {
  public:
    using Error::Error;
};

/// Predictions do not cover the ids they are evaluated or combined against.
class CoverageError : public Error {
  public:
    using Error::Error;
};

}  // namespace hteval
