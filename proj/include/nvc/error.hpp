#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nvc {

enum class ErrorCode {
  kInvalidConfig,
  kUnsupportedCombination,
  kEmptyScales,
  kTruncatedFile,
  kOddDimensions,
  kDimMismatch,
  kShapeMismatch,
  kEmptyDataset,
  kLevelCountMismatch,
  kAlignmentMismatch,
  kEmptyRange,
  kSymbolOutOfRange,
  kMalformedStream,
  kBadMagic,
  kVersionMismatch,
  kUnknownChunk,
  kInvalidKind,
  kIndexOutOfRange,
  kNanLoss,
  kNoOverlap,
  kDegenerateCurve,
  kZeroTotalBits,
  kMissingCheckpoint,
  kManifestError,
  kIoError,
};

std::string_view to_string(ErrorCode code);

// All recoverable failures in the library are reported as nvc::Error; the
// code identifies the failure class and what() carries the detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace nvc
