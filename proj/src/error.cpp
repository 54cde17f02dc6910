#include "nvc/error.hpp"

namespace nvc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig: return "invalid-config";
    case ErrorCode::kUnsupportedCombination: return "unsupported-combination";
    case ErrorCode::kEmptyScales: return "empty-scales";
    case ErrorCode::kTruncatedFile: return "truncated-file";
    case ErrorCode::kOddDimensions: return "odd-dimensions";
    case ErrorCode::kDimMismatch: return "dim-mismatch";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kEmptyDataset: return "empty-dataset";
    case ErrorCode::kLevelCountMismatch: return "level-count-mismatch";
    case ErrorCode::kAlignmentMismatch: return "alignment-mismatch";
    case ErrorCode::kEmptyRange: return "empty-range";
    case ErrorCode::kSymbolOutOfRange: return "symbol-out-of-range";
    case ErrorCode::kMalformedStream: return "malformed-stream";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kVersionMismatch: return "version-mismatch";
    case ErrorCode::kUnknownChunk: return "unknown-chunk";
    case ErrorCode::kInvalidKind: return "invalid-kind";
    case ErrorCode::kIndexOutOfRange: return "index-out-of-range";
    case ErrorCode::kNanLoss: return "nan-loss";
    case ErrorCode::kNoOverlap: return "no-overlap";
    case ErrorCode::kDegenerateCurve: return "degenerate-curve";
    case ErrorCode::kZeroTotalBits: return "zero-total-bits";
    case ErrorCode::kMissingCheckpoint: return "missing-checkpoint";
    case ErrorCode::kManifestError: return "manifest-error";
    case ErrorCode::kIoError: return "io-error";
  }
  return "unknown";
}

}  // namespace nvc
