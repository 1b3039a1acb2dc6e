#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cxr {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/shape disagreement.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Argument or record that violates a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf where finite values are required.
class NonFiniteError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Malformed dataset line; carries the 1-based line number.
class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Missing credential, bad config file, unknown preset.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Remote backend failed (HTTP status or connection) after all retries.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int status, int attempts)
      : Error(what), status_(status), attempts_(attempts) {}
  int status() const noexcept { return status_; }
  int attempts() const noexcept { return attempts_; }

 private:
  int status_;
  int attempts_;
};

class TimeoutError : public Error {
 public:
  TimeoutError(const std::string& what, int attempts) : Error(what), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

}  // namespace cxr
