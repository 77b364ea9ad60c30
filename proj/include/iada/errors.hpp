// Error types shared across the library. Everything derives from
// std::runtime_error so callers can catch broadly; the CLI maps the
// specific types onto exit codes.
#pragma once

#include <stdexcept>
#include <string>

namespace iada {

// Operand shapes do not conform for the requested operation.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// An operation produced a non-finite value, or an input was outside the
// numeric domain of the operation (log of a non-positive value, ...).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid argument values (negative scale, empty batch, bad proportions).
struct ValueError : std::runtime_error {
  explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};

// Configuration file problems; carries key and line information in the text.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// File-system problems (unreadable input, unwritable output directory).
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// A training run produced a non-finite loss or parameter.
struct TrainingDiverged : std::runtime_error {
  long iteration;
  TrainingDiverged(long iter, const std::string& msg)
      : std::runtime_error(msg), iteration(iter) {}
};

}  // namespace iada
