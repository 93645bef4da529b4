#pragma once

#include <stdexcept>
#include <string>

namespace adaptherm {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-range configuration input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Invalid mesh request (node count out of range, degenerate geometry).
class MeshError : public Error {
 public:
  using Error::Error;
};

/// Two objects that must agree in shape or surface do not.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Binary file with bad magic, version, or truncated payload.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Non-finite or non-positive temperature produced by the explicit scheme.
class InstabilityError : public Error {
 public:
  InstabilityError(const std::string& what, long step)
      : Error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

/// A loss or gradient became non-finite during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace adaptherm
