#include "metricforge/errors.hpp"

namespace metricforge {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::InvalidIntrinsics: return "InvalidIntrinsics";
    case ErrorCode::InvalidTransform: return "InvalidTransform";
    case ErrorCode::NonFinitePoint: return "NonFinitePoint";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnknownSceneKind: return "UnknownSceneKind";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::NoUsablePrompts: return "NoUsablePrompts";
    case ErrorCode::NonPositiveSourceAtPrompt: return "NonPositiveSourceAtPrompt";
    case ErrorCode::NoValidPixels: return "NoValidPixels";
    case ErrorCode::InvalidPrompt: return "InvalidPrompt";
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::EmptyOverlap: return "EmptyOverlap";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::UnknownLoss: return "UnknownLoss";
    case ErrorCode::NonPositiveFocal: return "NonPositiveFocal";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::DegenerateRays: return "DegenerateRays";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::ManifestParse: return "ManifestParse";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::WriteFailure: return "WriteFailure";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "UnknownError";
}

}  // namespace metricforge
