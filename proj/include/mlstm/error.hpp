#pragma once

#include <stdexcept>
#include <string>

namespace mlstm {

// Base class for every error raised by the library. The CLI maps the
// concrete type onto an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or missing columns in an input table.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Data that parses but violates a track invariant (duplicates, gaps, jumps).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Non-finite activations, losses or gradients.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class OutOfRangeError : public Error {
 public:
  using Error::Error;
};

// Bad configuration keys or values (usage level).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mlstm
