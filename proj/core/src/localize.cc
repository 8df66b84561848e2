#include "synthloc/localize.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "synthloc/error.h"

namespace synthloc {

PoseError ComputePoseError(const CameraPose& estimate, const CameraPose& ground_truth) {
  PoseError error;
  error.translation = (estimate.position - ground_truth.position).norm();
  const Eigen::Quaterniond relative =
      estimate.rotation.normalized() * ground_truth.rotation.normalized().conjugate();
  const double angle = 2.0 * std::atan2(relative.vec().norm(), std::abs(relative.w()));
  error.rotation_deg = std::min(180.0, angle * 180.0 / std::numbers::pi);
  return error;
}

void AccuracyThresholds::Validate() const {
  if (levels.empty()) throw Error(ErrorCode::kInvalidArgument, "no accuracy levels");
  for (size_t i = 1; i < levels.size(); ++i) {
    if (!(levels[i].max_translation > levels[i - 1].max_translation &&
          levels[i].max_rotation_deg > levels[i - 1].max_rotation_deg)) {
      throw Error(ErrorCode::kInvalidArgument, "accuracy levels must be strictly increasing");
    }
  }
}

std::vector<double> LocalizationRate(std::span<const std::optional<PoseError>> errors,
                                     const AccuracyThresholds& thresholds) {
  std::vector<double> rates;
  for (const auto& level : thresholds.levels) {
    int hits = 0;
    for (const auto& e : errors) {
      if (e && e->translation <= level.max_translation &&
          e->rotation_deg <= level.max_rotation_deg) {
        ++hits;
      }
    }
    rates.push_back(errors.empty() ? 0.0 : 100.0 * hits / static_cast<double>(errors.size()));
  }
  return rates;
}

CameraPose EwbPose(const RankedList& ranked, const std::map<int, CameraPose>& poses, int k) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (ranked.empty()) throw Error(ErrorCode::kEmptyRanking, "no retrieved views");
  const int used = std::min<int>(k, static_cast<int>(ranked.size()));
  auto pose_of = [&](int i) -> const CameraPose& {
    const auto it = poses.find(ranked[i].view_id);
    if (it == poses.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "no pose for view " + std::to_string(ranked[i].view_id));
    }
    return it->second;
  };
  const CameraPose& top = pose_of(0);
  if (used == 1) return top;

  // Running means keep identical inputs bit-exact.
  Eigen::Vector3d position = top.position;
  Eigen::Vector4d quat = top.rotation.coeffs();
  bool identical_rotations = true;
  for (int i = 1; i < used; ++i) {
    const CameraPose& pose = pose_of(i);
    position += (pose.position - position) / (i + 1);
    Eigen::Vector4d q = pose.rotation.coeffs();
    if (q.dot(top.rotation.coeffs()) < 0.0) q = -q;
    identical_rotations = identical_rotations && q == top.rotation.coeffs();
    quat += (q - quat) / (i + 1);
  }
  CameraPose out;
  out.position = position;
  out.rotation = identical_rotations
                     ? top.rotation
                     : CanonicalQuaternion(Eigen::Quaterniond(quat[3], quat[0], quat[1], quat[2]));
  return out;
}

std::vector<double> RecallAtK(const std::map<int, RankedList>& rankings,
                              const std::map<int, Eigen::Vector3d>& positions,
                              double radius, std::span<const int> ks) {
  std::vector<double> recalls;
  for (const int k : ks) {
    if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
    int hits = 0;
    for (const auto& [query_id, ranked] : rankings) {
      const auto query = positions.find(query_id);
      if (query == positions.end()) {
        throw Error(ErrorCode::kInvalidArgument,
                    "no position for query " + std::to_string(query_id));
      }
      const int used = std::min<int>(k, static_cast<int>(ranked.size()));
      for (int i = 0; i < used; ++i) {
        const auto view = positions.find(ranked[i].view_id);
        if (view != positions.end() && (view->second - query->second).norm() <= radius) {
          ++hits;
          break;
        }
      }
    }
    recalls.push_back(rankings.empty() ? 0.0
                                       : static_cast<double>(hits) / rankings.size());
  }
  return recalls;
}

SfmMatches CollectSfmMatches(const ViewImage& query, const RankedList& ranked,
                             std::span<const ViewImage> map_views,
                             std::span<const Landmark> landmarks, int k,
                             const MatchParams& match) {
  std::unordered_map<int, const ViewImage*> views;
  for (const auto& view : map_views) views[view.id] = &view;
  std::unordered_map<int, const Landmark*> points;
  for (const auto& landmark : landmarks) points[landmark.id] = &landmark;

  struct Best {
    double distance;
    Eigen::Vector2d pixel;
  };
  std::map<int, Best> best;
  const int used = std::min<int>(k, static_cast<int>(ranked.size()));
  for (int r = 0; r < used; ++r) {
    const auto it = views.find(ranked[r].view_id);
    if (it == views.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "ranked view " + std::to_string(ranked[r].view_id) + " is not a map view");
    }
    const ViewImage& view = *it->second;
    for (const auto& [i, j] : MatchFeatures(query, view, match).pairs) {
      const auto& landmark_id = view.features[j].landmark_id;
      if (!landmark_id || !points.count(*landmark_id)) continue;
      const double distance =
          (query.features[i].descriptor - view.features[j].descriptor).norm();
      const auto found = best.find(*landmark_id);
      if (found == best.end() || distance < found->second.distance) {
        best[*landmark_id] = {distance, query.features[i].keypoint};
      }
    }
  }
  SfmMatches out;
  for (const auto& [landmark_id, match_info] : best) {
    out.correspondences.push_back({match_info.pixel, points.at(landmark_id)->position});
    out.landmark_ids.push_back(landmark_id);
  }
  return out;
}

PnpResult SfmLocalize(const ViewImage& query, const RankedList& ranked,
                      std::span<const ViewImage> map_views,
                      std::span<const Landmark> landmarks, int k, const MatchParams& match,
                      const RansacParams& ransac) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (ranked.empty()) throw Error(ErrorCode::kEmptyRanking, "no retrieved views");
  const SfmMatches matches = CollectSfmMatches(query, ranked, map_views, landmarks, k, match);
  if (static_cast<int>(matches.correspondences.size()) < kPnpMinimalSample) {
    throw Error(ErrorCode::kNoConsensus,
                std::to_string(matches.correspondences.size()) +
                    " 2D-3D matches are too few for a pose");
  }
  return PnpRansac(matches.correspondences, query.intrinsics, ransac);
}

}  // namespace synthloc
