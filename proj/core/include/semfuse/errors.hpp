// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace semfuse {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible (matmul inner extents, broadcasting, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A softmax row had every position masked.
class SingularRowError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class ConstantChannelError : public Error {
 public:
  using Error::Error;
};

/// Assembled language-model input exceeds the position table.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Weight manifest is missing a tensor or declares the wrong shape.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// A checkpoint does not match the model it is being loaded into.
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

/// The requested operation needs a component the model variant lacks.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace semfuse
