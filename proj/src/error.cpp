#include "dragwarp/error.hpp"

namespace dragwarp {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "dimension_mismatch";
    case ErrorCode::NonFiniteValue: return "non_finite_value";
    case ErrorCode::BadMagic: return "bad_magic";
    case ErrorCode::HeaderParse: return "header_parse";
    case ErrorCode::PayloadTruncated: return "payload_truncated";
    case ErrorCode::DecodeError: return "decode_error";
    case ErrorCode::DegenerateDepthRange: return "degenerate_depth_range";
    case ErrorCode::EmptyMask: return "empty_mask";
    case ErrorCode::ShapeMismatch: return "shape_mismatch";
    case ErrorCode::HandleOutsideMask: return "handle_outside_mask";
    case ErrorCode::DegenerateVector: return "degenerate_vector";
    case ErrorCode::AmbiguousAxis: return "ambiguous_axis";
    case ErrorCode::DuplicateControlPoint: return "duplicate_control_point";
    case ErrorCode::SingularSystem: return "singular_system";
    case ErrorCode::AllVoid: return "all_void";
    case ErrorCode::BadScheduleParams: return "bad_schedule_params";
    case ErrorCode::AlphaOutOfRange: return "alpha_out_of_range";
    case ErrorCode::EtaOutOfRange: return "eta_out_of_range";
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::FileNotFound: return "file_not_found";
    case ErrorCode::MaskNotFound: return "mask_not_found";
    case ErrorCode::BadJson: return "bad_json";
    case ErrorCode::UnknownKey: return "unknown_key";
    case ErrorCode::NoSuchSession: return "no_such_session";
    case ErrorCode::Busy: return "busy";
  }
  return "unknown";
}

bool is_user_error(ErrorCode code) noexcept {
  return code != ErrorCode::Busy;
}

}  // namespace dragwarp
