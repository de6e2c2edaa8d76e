#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace plucker {

// Every failure raised by the library carries one of these codes. The CLI maps
// all of them to exit status 1.
enum class ErrorCode {
  kInvalidIntrinsics,
  kBadRotation,
  kDegenerateRays,
  kParallelRays,
  kRectOutOfBounds,
  kShapeMismatch,
  kCropLargerThanSource,
  kInvalidStairParams,
  kInvalidSamplerConfig,
  kDegenerateUp,
  kEmptyTrajectory,
  kMissingReference,
  kDofMismatch,
  kSpaceMismatch,
  kIoFailure,
  kCorruptFile,
  kUnsupportedVersion,
  kSchemaError,
  kRejectionOverflow,
  kNonFiniteLoss,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidIntrinsics: return "InvalidIntrinsics";
    case ErrorCode::kBadRotation: return "BadRotation";
    case ErrorCode::kDegenerateRays: return "DegenerateRays";
    case ErrorCode::kParallelRays: return "ParallelRays";
    case ErrorCode::kRectOutOfBounds: return "RectOutOfBounds";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kCropLargerThanSource: return "CropLargerThanSource";
    case ErrorCode::kInvalidStairParams: return "InvalidStairParams";
    case ErrorCode::kInvalidSamplerConfig: return "InvalidSamplerConfig";
    case ErrorCode::kDegenerateUp: return "DegenerateUp";
    case ErrorCode::kEmptyTrajectory: return "EmptyTrajectory";
    case ErrorCode::kMissingReference: return "MissingReference";
    case ErrorCode::kDofMismatch: return "DofMismatch";
    case ErrorCode::kSpaceMismatch: return "SpaceMismatch";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kCorruptFile: return "CorruptFile";
    case ErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kRejectionOverflow: return "RejectionOverflow";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
  }
  return "Unknown";
}

}  // namespace plucker
