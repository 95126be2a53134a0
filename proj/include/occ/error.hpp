#pragma once

#include <stdexcept>
#include <string>

namespace occ {

// Root of every error thrown by the library. The CLI maps each subclass to a
// process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes of two inputs disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A domain type failed its invariants (bad rig, bad scheme, bad label, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed file, text config or command-line value; also I/O failures.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A reduction was asked for over nothing (no supervised pixels, no voxels).
class EmptyDataError : public Error {
 public:
  using Error::Error;
};

}  // namespace occ
