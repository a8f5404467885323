#pragma once

#include <stdexcept>
#include <string>

namespace fhm {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// API misuse: bad preconditions, unknown names, calls out of order.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Inconsistent configuration (masks, schedules, hyper-parameters).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A NaN/Inf showed up in a computation that must stay finite.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A metric is not defined for the given graph (no edges, no chains).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// Synthetic data generation failed.
class GenerationError : public Error {
 public:
  using Error::Error;
};

// Dataset input is malformed or empty.
class IngestionError : public Error {
 public:
  using Error::Error;
};

// Dataset input does not match the declared schema.
class SchemaError : public IngestionError {
 public:
  using IngestionError::IngestionError;
};

// File system failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fhm
