#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace synthloc {

enum class ErrorCode {
  kInvalidArgument,
  kConfig,
  kData,
  kDegenerateWorld,
  kNoVisibleLandmarks,
  kAlreadySynthetic,
  kEmptyTupleSet,
  kMismatchedTupleFamily,
  kInsufficientNegatives,
  kInvalidSyntheticPair,
  kMissingVariant,
  kDiverged,
  kDimensionMismatch,
  kTooFewVectors,
  kCodebookMismatch,
  kEmptyRanking,
  kInsufficientCorrespondences,
  kNoConsensus,
};

// Stable snake_case name, used in status columns of output files.
std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace synthloc
