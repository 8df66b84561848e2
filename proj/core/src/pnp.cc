#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "synthloc/error.h"
#include "synthloc/localize.h"
#include "synthloc/random.h"

namespace synthloc {
namespace {

constexpr int kMaxRefits = 10;

std::vector<int> Classify(const CameraPose& pose, const CameraIntrinsics& intrinsics,
                          std::span<const Correspondence2d3d> corrs, double inlier_px) {
  std::vector<int> inliers;
  for (size_t i = 0; i < corrs.size(); ++i) {
    if (ReprojectionError(pose, intrinsics, corrs[i]) <= inlier_px) {
      inliers.push_back(static_cast<int>(i));
    }
  }
  return inliers;
}

std::vector<Correspondence2d3d> Subset(std::span<const Correspondence2d3d> corrs,
                                       const std::vector<int>& indices) {
  std::vector<Correspondence2d3d> out;
  out.reserve(indices.size());
  for (const int i : indices) out.push_back(corrs[i]);
  return out;
}

}  // namespace

void RansacParams::Validate() const {
  if (iterations < 1) throw Error(ErrorCode::kInvalidArgument, "iterations must be >= 1");
  if (!(inlier_px > 0.0)) throw Error(ErrorCode::kInvalidArgument, "inlier_px must be > 0");
  if (min_inliers < kPnpMinimalSample) {
    throw Error(ErrorCode::kInvalidArgument, "min_inliers must be >= 6");
  }
}

double ReprojectionError(const CameraPose& pose, const CameraIntrinsics& intrinsics,
                         const Correspondence2d3d& corr) {
  const auto pixel = intrinsics.Project(pose.ToCamera(corr.point));
  if (!pixel) return std::numeric_limits<double>::infinity();
  return (*pixel - corr.pixel).norm();
}

std::optional<CameraPose> SolvePnpDlt(std::span<const Correspondence2d3d> corrs,
                                      const CameraIntrinsics& intrinsics) {
  const int n = static_cast<int>(corrs.size());
  if (n < kPnpMinimalSample) {
    throw Error(ErrorCode::kInsufficientCorrespondences,
                std::to_string(n) + " correspondences, need 6");
  }
  // Center and scale the 3D points for conditioning.
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& c : corrs) centroid += c.point;
  centroid /= n;
  double spread = 0.0;
  for (const auto& c : corrs) spread += (c.point - centroid).norm();
  spread /= n;
  if (!(spread > 0.0)) return std::nullopt;
  const double scale = std::sqrt(3.0) / spread;

  Eigen::MatrixXd a(2 * n, 12);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d ray = intrinsics.Unproject(corrs[i].pixel);
    Eigen::Vector4d x;
    x << (corrs[i].point - centroid) * scale, 1.0;
    a.row(2 * i) << -x.transpose(), Eigen::RowVector4d::Zero(), ray.x() * x.transpose();
    a.row(2 * i + 1) << Eigen::RowVector4d::Zero(), -x.transpose(), ray.y() * x.transpose();
  }
  Eigen::Matrix<double, 12, 1> p;
  if (n == kPnpMinimalSample) {
    // Null vector of the normal matrix.
    const Eigen::Matrix<double, 12, 12> normal = a.transpose() * a;
    p = Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 12, 12>>(normal).eigenvectors().col(0);
  } else {
    p = Eigen::JacobiSVD<Eigen::MatrixXd>(a, Eigen::ComputeFullV).matrixV().col(11);
  }
  Eigen::Matrix<double, 3, 4> normalized_p;
  normalized_p << p.segment<4>(0).transpose(), p.segment<4>(4).transpose(),
      p.segment<4>(8).transpose();

  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  t.topLeftCorner<3, 3>() *= scale;
  t.topRightCorner<3, 1>() = -scale * centroid;
  Eigen::Matrix<double, 3, 4> projection = normalized_p * t;

  Eigen::Matrix3d m = projection.leftCols<3>();
  if (m.determinant() < 0.0) {
    projection = -projection;
    m = -m;
  }
  const Eigen::JacobiSVD<Eigen::Matrix3d> msvd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double lambda = msvd.singularValues().mean();
  if (!(lambda > 0.0)) return std::nullopt;
  const Eigen::Matrix3d camera_from_world = msvd.matrixU() * msvd.matrixV().transpose();
  if (camera_from_world.determinant() < 0.0) return std::nullopt;
  const Eigen::Vector3d translation = projection.col(3) / lambda;

  const CameraPose pose = CameraPose::FromMatrix(camera_from_world.transpose(),
                                                 -camera_from_world.transpose() * translation);
  int in_front = 0;
  for (const auto& c : corrs) in_front += pose.ToCamera(c.point).z() > 0.0 ? 1 : 0;
  if (2 * in_front <= n) return std::nullopt;
  if (!pose.position.allFinite()) return std::nullopt;
  return pose;
}

PnpResult PnpRansac(std::span<const Correspondence2d3d> corrs,
                    const CameraIntrinsics& intrinsics, const RansacParams& params) {
  params.Validate();
  const int n = static_cast<int>(corrs.size());
  if (n < kPnpMinimalSample) {
    throw Error(ErrorCode::kInsufficientCorrespondences,
                std::to_string(n) + " correspondences, need 6");
  }
  Rng rng = MakeRng(params.seed, {0x9a5c});
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  PnpResult best;
  for (int iter = 0; iter < params.iterations; ++iter) {
    // Partial Fisher-Yates for a sample of 6 distinct indices.
    std::vector<Correspondence2d3d> sample;
    for (int s = 0; s < kPnpMinimalSample; ++s) {
      std::uniform_int_distribution<int> pick(s, n - 1);
      std::swap(order[s], order[pick(rng)]);
      sample.push_back(corrs[order[s]]);
    }
    const auto pose = SolvePnpDlt(sample, intrinsics);
    if (!pose) continue;
    auto inliers = Classify(*pose, intrinsics, corrs, params.inlier_px);
    if (inliers.size() > best.inliers.size()) {
      best.pose = *pose;
      best.inliers = std::move(inliers);
    }
  }
  if (static_cast<int>(best.inliers.size()) < params.min_inliers) {
    throw Error(ErrorCode::kNoConsensus, "best hypothesis has " +
                                             std::to_string(best.inliers.size()) +
                                             " inliers, need " +
                                             std::to_string(params.min_inliers));
  }

  for (int refit = 0; refit < kMaxRefits; ++refit) {
    const auto pose = SolvePnpDlt(Subset(corrs, best.inliers), intrinsics);
    if (!pose) break;
    auto inliers = Classify(*pose, intrinsics, corrs, params.inlier_px);
    if (inliers.size() < best.inliers.size()) break;
    const bool stable = inliers == best.inliers;
    best.pose = *pose;
    best.inliers = std::move(inliers);
    if (stable) break;
  }
  return best;
}

}  // namespace synthloc
