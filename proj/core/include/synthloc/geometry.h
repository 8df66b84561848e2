#pragma once

#include <string>
#include <utility>
#include <vector>

#include "synthloc/types.h"

namespace synthloc {

struct MatchParams {
  // Lowe ratio on Euclidean descriptor distance, applied on both sides.
  double ratio = 0.9;
  // Keypoint agreement radius in pixels.
  double pixel_tol = 2.0;
};

// One-to-one feature index pairs (index into a, index into b).
struct Correspondences {
  std::vector<std::pair<int, int>> pairs;
  std::string method;

  size_t size() const { return pairs.size(); }
};

struct ConsistencyScore {
  double value = 0.0;
  int kept = 0;
  int original = 0;

  // No reference correspondences to compare against.
  bool degenerate() const { return original == 0; }
};

enum class ThresholdMode { kRelative, kAbsolute };

// Mutual nearest neighbours under Euclidean descriptor distance, each side
// passing the ratio test. Ties resolve to the lowest index, which makes the
// result symmetric: Match(b, a) is the transpose of Match(a, b).
Correspondences MatchFeatures(const ViewImage& a, const ViewImage& b,
                              const MatchParams& params);

// Keeps the pairs whose keypoints agree under the identity transform.
Correspondences VerifyIdentity(const Correspondences& corrs, const ViewImage& a,
                               const ViewImage& b, double pixel_tol);

// Fraction of the (q, p) correspondences inside the co-observed area that
// survive when q is replaced by `q_variant`. Correspondences of the two
// matchings are identified through their p-side keypoints.
ConsistencyScore ComputeConsistencyScore(const ViewImage& q, const ViewImage& p,
                                         const ViewImage& q_variant,
                                         const MatchParams& params);

bool ValidatePair(const ConsistencyScore& score, double c_tau,
                  ThresholdMode mode = ThresholdMode::kRelative);

// Validation of a view against its own variant: identity-verified matches
// over the landmark-bearing features of `x`.
ConsistencyScore SelfConsistency(const ViewImage& x, const ViewImage& x_variant,
                                 const MatchParams& params);

}  // namespace synthloc
