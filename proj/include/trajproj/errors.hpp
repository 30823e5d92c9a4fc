#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace trajproj {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched grids, vector lengths or array shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (negative lambda, unknown scheme tag, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operation requested on a grid that does not support it.
class UnsupportedOperation : public Error {
 public:
  using Error::Error;
};

/// Base for failures of the numerics themselves (CLI exit code 2).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A time integrator produced a non-finite state.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : NumericalError("divergence at step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Newton iteration of an implicit step failed to reach its tolerance.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(std::size_t step, double final_residual)
      : NumericalError("newton did not converge at step " + std::to_string(step) +
                       " (final residual " + std::to_string(final_residual) + ")"),
        step_(step),
        final_residual_(final_residual) {}
  std::size_t step() const noexcept { return step_; }
  double final_residual() const noexcept { return final_residual_; }

 private:
  std::size_t step_;
  double final_residual_;
};

/// Malformed trajectory file. Names the offending field and byte offset.
class ParseError : public Error {
 public:
  ParseError(std::string field, std::size_t offset, const std::string& message)
      : Error(message), field_(std::move(field)), offset_(offset) {}
  const std::string& field() const noexcept { return field_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string field_;
  std::size_t offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace trajproj
