#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "synthloc/geometry.h"
#include "synthloc/index.h"
#include "synthloc/types.h"

namespace synthloc {

struct PoseError {
  double translation = 0.0;   // meters
  double rotation_deg = 0.0;  // in [0, 180]
};

// Translation distance and the angle of R_est * R_gt^T.
PoseError ComputePoseError(const CameraPose& estimate, const CameraPose& ground_truth);

struct AccuracyThreshold {
  std::string name;
  double max_translation = 0.0;
  double max_rotation_deg = 0.0;
};

struct AccuracyThresholds {
  // Strictest first: high (0.25 m, 2 deg), mid (0.5 m, 5 deg), low (5 m, 10 deg).
  std::vector<AccuracyThreshold> levels = {
      {"high", 0.25, 2.0}, {"mid", 0.5, 5.0}, {"low", 5.0, 10.0}};

  void Validate() const;
};

// Percentage of queries within each level. Unlocalized queries (nullopt)
// fail every level.
std::vector<double> LocalizationRate(std::span<const std::optional<PoseError>> errors,
                                     const AccuracyThresholds& thresholds = {});

// Equal weighted barycenter of the top-k poses: mean position and the
// renormalized mean of quaternions sign-aligned to the top-1.
CameraPose EwbPose(const RankedList& ranked, const std::map<int, CameraPose>& poses, int k);

struct Correspondence2d3d {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
};

struct RansacParams {
  int iterations = 1000;
  double inlier_px = 3.0;
  int min_inliers = 8;
  uint64_t seed = 0;

  void Validate() const;
};

struct PnpResult {
  CameraPose pose;
  std::vector<int> inliers;  // ascending correspondence indices
};

inline constexpr int kPnpMinimalSample = 6;

// Linear pose from >= 6 correspondences; nullopt for degenerate
// configurations or points behind the camera.
std::optional<CameraPose> SolvePnpDlt(std::span<const Correspondence2d3d> corrs,
                                      const CameraIntrinsics& intrinsics);

double ReprojectionError(const CameraPose& pose, const CameraIntrinsics& intrinsics,
                         const Correspondence2d3d& corr);

// Throws kInsufficientCorrespondences below 6 inputs and kNoConsensus when no
// hypothesis gathers min_inliers.
PnpResult PnpRansac(std::span<const Correspondence2d3d> corrs,
                    const CameraIntrinsics& intrinsics, const RansacParams& params);

struct SfmMatches {
  std::vector<Correspondence2d3d> correspondences;
  std::vector<int> landmark_ids;  // parallel to correspondences, ascending
};

// Matches the query against the top-k views and lifts map features to their
// landmarks, keeping the closest descriptor match per landmark.
SfmMatches CollectSfmMatches(const ViewImage& query, const RankedList& ranked,
                             std::span<const ViewImage> map_views,
                             std::span<const Landmark> landmarks, int k,
                             const MatchParams& match);

// Throws kEmptyRanking for an empty list and kNoConsensus when the matches
// cannot support a pose.
PnpResult SfmLocalize(const ViewImage& query, const RankedList& ranked,
                      std::span<const ViewImage> map_views,
                      std::span<const Landmark> landmarks, int k, const MatchParams& match,
                      const RansacParams& ransac);

// Fraction of queries with at least one of the top-k views within `radius`
// of the query position, for each k.
std::vector<double> RecallAtK(const std::map<int, RankedList>& rankings,
                              const std::map<int, Eigen::Vector3d>& positions,
                              double radius, std::span<const int> ks);

inline constexpr double kPlaceRecognitionRadius = 25.0;

}  // namespace synthloc
