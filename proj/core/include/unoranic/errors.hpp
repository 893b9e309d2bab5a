#pragma once

#include <stdexcept>
#include <string>

namespace unoranic {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or incomplete file content (missing archive key, bad NPY header).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Structurally valid data that is inconsistent with itself.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or specification value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// A metric that is undefined for the given input (e.g. AUC with one class).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// A stored artifact does not match what the caller expects
// (architecture vs. dataset shape, checkpoint version tag).
class ArtifactMismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace unoranic
