#pragma once

#include <stdexcept>
#include <string>

namespace cinest {

// Base class for every error raised by the library. The CLI maps subclasses
// onto exit codes: configuration/usage problems exit 2, runtime failures 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid schema: cycles, dangling edge labels, unknown tables.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// CSV or dictionary problems while loading a table.
class LoadError : public Error {
 public:
  using Error::Error;
};

// Malformed workload or config file.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Query cannot be answered with the available subschemas/estimators.
class EstimationError : public Error {
 public:
  using Error::Error;
};

// Model file unreadable, corrupt or built for another layout.
class ModelError : public Error {
 public:
  using Error::Error;
};

// Training diverged (NaN/inf loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace cinest
