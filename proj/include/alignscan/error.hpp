#pragma once

#include <stdexcept>
#include <string>

namespace alignscan {

// Base of everything the library throws on bad input.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or lengths that do not line up.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// A value outside its admissible range (negative timescale, keep count 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Operation not defined for the requested parameter mode.
class UnsupportedModeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace alignscan
