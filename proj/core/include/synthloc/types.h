#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace synthloc {

inline constexpr std::string_view kOriginalCondition = "original";

struct Landmark {
  int id = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  // Unit norm.
  Eigen::VectorXd base_descriptor;
};

// Camera orientation and center. `rotation` maps camera-frame directions to
// the world frame (camera looks along +z, x right, y down). The quaternion is
// kept unit-norm with w >= 0.
struct CameraPose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d position = Eigen::Vector3d::Zero();

  static CameraPose FromQuaternion(const Eigen::Quaterniond& q,
                                   const Eigen::Vector3d& center);
  static CameraPose FromMatrix(const Eigen::Matrix3d& world_from_camera,
                               const Eigen::Vector3d& center);

  Eigen::Matrix3d WorldFromCamera() const { return rotation.toRotationMatrix(); }
  Eigen::Vector3d ToCamera(const Eigen::Vector3d& world_point) const;
  Eigen::Vector3d ToWorld(const Eigen::Vector3d& camera_point) const;
};

// Unit quaternion with non-negative scalar part.
Eigen::Quaterniond CanonicalQuaternion(const Eigen::Quaterniond& q);

struct CameraIntrinsics {
  double focal = 500.0;
  Eigen::Vector2d principal_point{320.0, 240.0};
  int width = 640;
  int height = 480;

  bool Contains(const Eigen::Vector2d& pixel) const;
  // Pinhole projection of a camera-frame point; nullopt behind the camera.
  std::optional<Eigen::Vector2d> Project(const Eigen::Vector3d& camera_point) const;
  // Ray direction in the camera frame with unit depth (z = 1).
  Eigen::Vector3d Unproject(const Eigen::Vector2d& pixel) const;
  void Validate() const;
};

struct LocalFeature {
  Eigen::Vector2d keypoint = Eigen::Vector2d::Zero();
  Eigen::VectorXd descriptor;
  std::optional<int> landmark_id;  // absent for clutter
};

struct ViewImage {
  int id = 0;
  CameraPose pose;
  CameraIntrinsics intrinsics;
  std::vector<LocalFeature> features;
  std::string condition{kOriginalCondition};

  bool IsOriginal() const { return condition == kOriginalCondition; }
  int DescriptorDim() const;
  // Sorted, unique landmark ids carried by the features.
  std::vector<int> LandmarkIds() const;
  int NumLandmarkFeatures() const;
  // d x n matrix of descriptors, column i = features[i].descriptor.
  Eigen::MatrixXd DescriptorMatrix() const;
};

struct MatchingPair {
  int a = 0;  // a < b
  int b = 0;
  int count = 0;

  bool operator==(const MatchingPair&) const = default;
};

struct World {
  std::vector<Landmark> landmarks;
  std::vector<ViewImage> map_views;
  std::vector<ViewImage> query_views;
  std::vector<MatchingPair> matching_pairs;
  uint64_t seed = 0;

  int DescriptorDim() const;
  // Throws kInvalidArgument for unknown ids.
  const ViewImage& MapView(int view_id) const;
};

// Number of shared landmark ids between two sorted id lists.
int CountShared(const std::vector<int>& sorted_a, const std::vector<int>& sorted_b);

}  // namespace synthloc
