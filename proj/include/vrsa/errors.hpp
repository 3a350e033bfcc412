#pragma once

#include <stdexcept>
#include <string>

namespace vrsa {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text or binary (JSON, CSV, VCT1, VRSK).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a data invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Missing or unwritable file.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or activations during training or inference.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class LengthMismatchError : public Error {
 public:
  using Error::Error;
};

/// Correlation requested on a constant sequence.
class ConstantInputError : public Error {
 public:
  using Error::Error;
};

/// Bad magic, unsupported version or truncated checkpoint.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace vrsa
