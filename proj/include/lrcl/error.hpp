#pragma once

#include <stdexcept>
#include <string>

namespace lrcl {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes disagree; the message names the offending dimension.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A scalar hyperparameter is outside its legal range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A vector whose norm is too small to normalize.
class DegenerateVectorError : public Error {
 public:
  using Error::Error;
};

class LabelError : public Error {
 public:
  using Error::Error;
};

/// Reduction over an empty axis, empty batch or empty list.
class EmptyError : public Error {
 public:
  using Error::Error;
};

/// Malformed checkpoint or dataset file (bad magic, truncation, overlap).
class CorruptionError : public Error {
 public:
  using Error::Error;
};

/// Dataset content does not satisfy a precondition (too short, too few windows).
class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace lrcl
