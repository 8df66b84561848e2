#include "synthloc/types.h"

#include <algorithm>
#include <cmath>

#include "synthloc/error.h"

namespace synthloc {

Eigen::Quaterniond CanonicalQuaternion(const Eigen::Quaterniond& q) {
  Eigen::Quaterniond out = q.normalized();
  if (out.w() < 0.0) out.coeffs() = -out.coeffs();
  return out;
}

CameraPose CameraPose::FromQuaternion(const Eigen::Quaterniond& q,
                                      const Eigen::Vector3d& center) {
  CameraPose pose;
  pose.rotation = CanonicalQuaternion(q);
  pose.position = center;
  return pose;
}

CameraPose CameraPose::FromMatrix(const Eigen::Matrix3d& world_from_camera,
                                  const Eigen::Vector3d& center) {
  return FromQuaternion(Eigen::Quaterniond(world_from_camera), center);
}

Eigen::Vector3d CameraPose::ToCamera(const Eigen::Vector3d& world_point) const {
  return rotation.conjugate() * (world_point - position);
}

Eigen::Vector3d CameraPose::ToWorld(const Eigen::Vector3d& camera_point) const {
  return rotation * camera_point + position;
}

bool CameraIntrinsics::Contains(const Eigen::Vector2d& pixel) const {
  return pixel.x() >= 0.0 && pixel.y() >= 0.0 && pixel.x() <= width &&
         pixel.y() <= height;
}

std::optional<Eigen::Vector2d> CameraIntrinsics::Project(
    const Eigen::Vector3d& camera_point) const {
  if (camera_point.z() <= 1e-9) return std::nullopt;
  return Eigen::Vector2d(focal * camera_point.x() / camera_point.z(),
                         focal * camera_point.y() / camera_point.z()) +
         principal_point;
}

Eigen::Vector3d CameraIntrinsics::Unproject(const Eigen::Vector2d& pixel) const {
  const Eigen::Vector2d xy = (pixel - principal_point) / focal;
  return Eigen::Vector3d(xy.x(), xy.y(), 1.0);
}

void CameraIntrinsics::Validate() const {
  if (!(focal > 0.0) || width <= 0 || height <= 0 || !Contains(principal_point)) {
    throw Error(ErrorCode::kInvalidArgument,
                "intrinsics need focal > 0 and a principal point inside the image");
  }
}

int ViewImage::DescriptorDim() const {
  return features.empty() ? 0 : static_cast<int>(features.front().descriptor.size());
}

std::vector<int> ViewImage::LandmarkIds() const {
  std::vector<int> ids;
  ids.reserve(features.size());
  for (const auto& feature : features) {
    if (feature.landmark_id) ids.push_back(*feature.landmark_id);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

int ViewImage::NumLandmarkFeatures() const {
  return static_cast<int>(std::count_if(
      features.begin(), features.end(),
      [](const LocalFeature& f) { return f.landmark_id.has_value(); }));
}

Eigen::MatrixXd ViewImage::DescriptorMatrix() const {
  Eigen::MatrixXd m(DescriptorDim(), static_cast<Eigen::Index>(features.size()));
  for (size_t i = 0; i < features.size(); ++i) {
    m.col(static_cast<Eigen::Index>(i)) = features[i].descriptor;
  }
  return m;
}

int World::DescriptorDim() const {
  return landmarks.empty() ? 0
                           : static_cast<int>(landmarks.front().base_descriptor.size());
}

const ViewImage& World::MapView(int view_id) const {
  // Map views are generated with dense ids starting at 0, but files written
  // by other tools might not be, so fall back to a scan.
  if (view_id >= 0 && view_id < static_cast<int>(map_views.size()) &&
      map_views[view_id].id == view_id) {
    return map_views[view_id];
  }
  for (const auto& view : map_views) {
    if (view.id == view_id) return view;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown map view id " + std::to_string(view_id));
}

int CountShared(const std::vector<int>& sorted_a, const std::vector<int>& sorted_b) {
  int count = 0;
  auto ia = sorted_a.begin();
  auto ib = sorted_b.begin();
  while (ia != sorted_a.end() && ib != sorted_b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++count;
      ++ia;
      ++ib;
    }
  }
  return count;
}

}  // namespace synthloc
