// SPDX-License-Identifier: Apache-2.0
/**
 * @file   error.hpp
 * @brief  Exception hierarchy shared by every idmf module.
 */
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace idmf {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Structurally invalid input data (mismatched dt, wrong lengths, ...).
class InputError : public Error {
public:
  using Error::Error;
};

/// Invalid configuration values (ratios, hyperparameters, unknown keys).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A physical state outside the model's domain, e.g. a non-positive gap.
class DomainError : public Error {
public:
  DomainError(const std::string &what, std::ptrdiff_t index = -1)
    : Error(what), index_(index) {}

  /// Sample or step index at which the failure occurred, -1 if unknown.
  std::ptrdiff_t index() const noexcept { return index_; }

private:
  std::ptrdiff_t index_;
};

/// Malformed file contents.
class ParseError : public Error {
public:
  ParseError(const std::string &what, std::size_t line = 0)
    : Error(what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Tensor shape mismatch in the autodiff layer.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// Checkpoint file version or integrity failure.
class CheckpointError : public Error {
public:
  using Error::Error;
};

/// Non-finite loss or other unrecoverable training failure.
class TrainingError : public Error {
public:
  using Error::Error;
};

} // namespace idmf
