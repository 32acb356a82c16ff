#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dragwarp {

enum class ErrorCode {
  // grid-core
  DimensionMismatch,
  NonFiniteValue,
  BadMagic,
  HeaderParse,
  PayloadTruncated,
  DecodeError,
  // geometry
  DegenerateDepthRange,
  EmptyMask,
  ShapeMismatch,
  HandleOutsideMask,
  DegenerateVector,
  AmbiguousAxis,
  DuplicateControlPoint,
  SingularSystem,
  // projection
  AllVoid,
  // sampler
  BadScheduleParams,
  AlphaOutOfRange,
  EtaOutOfRange,
  // pipeline / service
  InvalidArgument,
  FileNotFound,
  MaskNotFound,
  BadJson,
  UnknownKey,
  NoSuchSession,
  Busy,
};

/// Stable snake_case identifier used in CLI and HTTP error payloads.
std::string_view error_name(ErrorCode code) noexcept;

/// True for errors caused by caller input (CLI exit 2, HTTP 4xx).
bool is_user_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view name() const noexcept { return error_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace dragwarp
