#include "voxelforge/error.hpp"

namespace voxelforge {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
    case ErrorKind::MalformedHeader: return "MalformedHeader";
    case ErrorKind::UnsupportedElementType: return "UnsupportedElementType";
    case ErrorKind::RawSizeMismatch: return "RawSizeMismatch";
    case ErrorKind::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorKind::DegenerateIntensity: return "DegenerateIntensity";
    case ErrorKind::EmptyForeground: return "EmptyForeground";
    case ErrorKind::RangeOutOfBounds: return "RangeOutOfBounds";
    case ErrorKind::EmptyVolume: return "EmptyVolume";
    case ErrorKind::VolumeTooSmall: return "VolumeTooSmall";
    case ErrorKind::AnchorOutOfBounds: return "AnchorOutOfBounds";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::CrcMismatch: return "CrcMismatch";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::NonPositiveOutput: return "NonPositiveOutput";
    case ErrorKind::InvariantBreach: return "InvariantBreach";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace voxelforge
