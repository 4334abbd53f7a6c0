// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace irr {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a precondition (wrong mode, missing argument, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class EmptyDatasetError : public DataError {
 public:
  using DataError::DataError;
};

class CapacityError : public DataError {
 public:
  using DataError::DataError;
};

class LookupError : public DataError {
 public:
  using DataError::DataError;
};

/// Malformed text or binary input. Carries the 1-based line number when known.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : DataError(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// I/O or version problem with a persisted artifact.
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace irr
