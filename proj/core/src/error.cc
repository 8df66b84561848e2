#include "synthloc/error.h"

namespace synthloc {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kConfig: return "config_error";
    case ErrorCode::kData: return "data_error";
    case ErrorCode::kDegenerateWorld: return "degenerate_world";
    case ErrorCode::kNoVisibleLandmarks: return "no_visible_landmarks";
    case ErrorCode::kAlreadySynthetic: return "already_synthetic";
    case ErrorCode::kEmptyTupleSet: return "empty_tuple_set";
    case ErrorCode::kMismatchedTupleFamily: return "mismatched_tuple_family";
    case ErrorCode::kInsufficientNegatives: return "insufficient_negatives";
    case ErrorCode::kInvalidSyntheticPair: return "invalid_synthetic_pair";
    case ErrorCode::kMissingVariant: return "missing_variant";
    case ErrorCode::kDiverged: return "diverged";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kTooFewVectors: return "too_few_vectors";
    case ErrorCode::kCodebookMismatch: return "codebook_mismatch";
    case ErrorCode::kEmptyRanking: return "empty_ranking";
    case ErrorCode::kInsufficientCorrespondences:
      return "insufficient_correspondences";
    case ErrorCode::kNoConsensus: return "no_consensus";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
      code_(code) {}

}  // namespace synthloc
