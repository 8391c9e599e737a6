#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sloppy {

enum class ErrorKind {
  NonPositiveParameter,
  DuplicateName,
  AxisOutOfRange,
  InvalidSimulationConfig,
  ModelFailure,
  NonFiniteOutput,
  NonPositiveShifted,
  ShapeMismatch,
  ZeroNormalization,
  ZeroReference,
  Divergent,
  EmptySamples,
  EdgeMismatch,
  InvalidArgument,
  NotSymmetric,
  NonPositiveEigenvalue,
  DegenerateSpectrum,
  SeriesTooShort,
  LaunchFailure,
  Timeout,
  ProtocolError,
  ConfigError,
};

std::string_view to_string(ErrorKind kind) noexcept;

// All library failures are reported through this one exception type; callers
// dispatch on kind() rather than on a class hierarchy.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// True for failures that originate in a simulator (builtin or external).
bool is_model_error(ErrorKind kind) noexcept;

}  // namespace sloppy
