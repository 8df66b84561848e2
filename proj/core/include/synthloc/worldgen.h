#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "synthloc/types.h"

namespace synthloc {

struct RenderNoise {
  double keypoint_sigma = 0.0;    // pixels
  double descriptor_sigma = 0.0;  // per component
  int clutter_count = 0;
};

// A street scene: a piecewise-linear camera trajectory in the ground plane
// with landmarks scattered in a band along its left side. Cameras look
// broadside at the band.
struct WorldConfig {
  int num_landmarks = 500;
  int descriptor_dim = 32;
  int num_map_views = 40;
  int num_queries = 20;
  // Each clean query gets a shifted twin rendered under one of these prompts
  // (round-robin). Empty disables shifted queries.
  std::vector<std::string> shifted_query_conditions = {"at night", "at night with rain"};
  uint64_t prompt_seed = 0;

  std::vector<Eigen::Vector2d> street = {
      Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(40.0, 0.0), Eigen::Vector2d(70.0, 15.0)};
  double street_padding = 10.0;
  double lateral_min = 6.0;
  double lateral_max = 14.0;
  double height_min = 0.0;
  double height_max = 8.0;
  double camera_height = 1.5;
  double heading_jitter_deg = 2.0;
  double visibility_radius = 20.0;
  double query_translation_sigma = 0.5;
  double query_rotation_sigma_deg = 2.0;

  CameraIntrinsics intrinsics;
  RenderNoise map_noise{0.5, 0.05, 5};
  RenderNoise query_noise{0.5, 0.05, 5};

  int min_visible = 4;
  int min_coobs = 10;

  void Validate() const;
};

World GenerateWorld(const WorldConfig& config, uint64_t seed);

// Ids of landmarks in front of the camera, inside the image and within
// `max_distance` of the camera center, ascending.
std::vector<int> VisibleLandmarks(std::span<const Landmark> landmarks,
                                  const CameraPose& pose,
                                  const CameraIntrinsics& intrinsics,
                                  double max_distance);

// Renders the landmarks visible from `pose` as local features. Noise draws
// come from a stream derived from (seed, view_id).
ViewImage RenderView(std::span<const Landmark> landmarks, int view_id,
                     const CameraPose& pose, const CameraIntrinsics& intrinsics,
                     const RenderNoise& noise, uint64_t seed,
                     double max_distance = 1e9);

// All pairs (a < b) of views sharing at least `min_coobs` landmark ids.
std::vector<MatchingPair> MakeMatchingPairs(std::span<const ViewImage> views,
                                            int min_coobs);

// Camera looking along the left normal of the street direction `heading`
// (radians, ground plane), rotated by `yaw`, `pitch` and `roll` (radians).
Eigen::Matrix3d BroadsideRotation(double heading, double yaw, double pitch, double roll);

}  // namespace synthloc
