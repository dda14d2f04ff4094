#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace voxelforge {

enum class ErrorKind {
  InvalidArgument,
  Io,
  MalformedHeader,
  UnsupportedElementType,
  RawSizeMismatch,
  UnsupportedDatatype,
  DegenerateIntensity,
  EmptyForeground,
  RangeOutOfBounds,
  EmptyVolume,
  VolumeTooSmall,
  AnchorOutOfBounds,
  ShapeMismatch,
  DomainError,
  CrcMismatch,
  TruncatedFile,
  NonPositiveOutput,
  InvariantBreach,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries one of the kinds above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace voxelforge
