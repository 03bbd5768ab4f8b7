#pragma once

#include <stdexcept>
#include <string>

namespace metricforge {

enum class ErrorCode {
  // geometry
  EmptyCloud,
  InvalidIntrinsics,
  InvalidTransform,
  NonFinitePoint,
  DimensionMismatch,
  UnknownSceneKind,
  // alignment
  DegenerateFit,
  NoUsablePrompts,
  NonPositiveSourceAtPrompt,
  // prompting
  NoValidPixels,
  InvalidPrompt,
  // losses
  NonPositiveDepth,
  EmptyOverlap,
  EmptyMask,
  UnknownLoss,
  // metrics
  NonPositiveFocal,
  // calibration
  InsufficientPoints,
  DegenerateRays,
  // io / cli
  FormatError,
  ManifestParse,
  MissingInput,
  WriteFailure,
  InvalidArgument,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace metricforge
