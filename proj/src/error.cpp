#include "sloppy/error.hpp"

namespace sloppy {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NonPositiveParameter: return "NonPositiveParameter";
    case ErrorKind::DuplicateName: return "DuplicateName";
    case ErrorKind::AxisOutOfRange: return "AxisOutOfRange";
    case ErrorKind::InvalidSimulationConfig: return "InvalidSimulationConfig";
    case ErrorKind::ModelFailure: return "ModelFailure";
    case ErrorKind::NonFiniteOutput: return "NonFiniteOutput";
    case ErrorKind::NonPositiveShifted: return "NonPositiveShifted";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::ZeroNormalization: return "ZeroNormalization";
    case ErrorKind::ZeroReference: return "ZeroReference";
    case ErrorKind::Divergent: return "Divergent";
    case ErrorKind::EmptySamples: return "EmptySamples";
    case ErrorKind::EdgeMismatch: return "EdgeMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::NonPositiveEigenvalue: return "NonPositiveEigenvalue";
    case ErrorKind::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorKind::SeriesTooShort: return "SeriesTooShort";
    case ErrorKind::LaunchFailure: return "LaunchFailure";
    case ErrorKind::Timeout: return "Timeout";
    case ErrorKind::ProtocolError: return "ProtocolError";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

bool is_model_error(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ModelFailure:
    case ErrorKind::NonFiniteOutput:
    case ErrorKind::NonPositiveShifted:
    case ErrorKind::LaunchFailure:
    case ErrorKind::Timeout:
    case ErrorKind::ProtocolError:
      return true;
    default:
      return false;
  }
}

}  // namespace sloppy
