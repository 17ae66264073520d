#pragma once

#include <stdexcept>
#include <string>

namespace mnn {

// Base for every error the library raises on contract violations.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Vector or matrix dimensions that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A finite value outside its legal interval (weights, inputs, pins).
class RangeError : public Error {
 public:
  using Error::Error;
};

// Non-finite arguments.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed documents, build sheets, datasets.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace mnn
