#include "synthloc/worldgen.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <tuple>

#include "synthloc/error.h"
#include "synthloc/random.h"
#include "synthloc/variants.h"

namespace synthloc {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

class Polyline {
 public:
  explicit Polyline(const std::vector<Eigen::Vector2d>& points) : points_(points) {
    cumulative_.push_back(0.0);
    for (size_t i = 1; i < points_.size(); ++i) {
      cumulative_.push_back(cumulative_.back() + (points_[i] - points_[i - 1]).norm());
    }
  }

  double length() const { return cumulative_.back(); }

  // Positions beyond either end extrapolate along the end segments.
  Eigen::Vector2d PointAt(double s) const {
    const size_t seg = SegmentAt(s);
    return points_[seg] + (s - cumulative_[seg]) * Direction(seg);
  }

  Eigen::Vector2d TangentAt(double s) const { return Direction(SegmentAt(s)); }

 private:
  size_t SegmentAt(double s) const {
    size_t seg = 0;
    while (seg + 2 < points_.size() && s > cumulative_[seg + 1]) ++seg;
    return seg;
  }

  Eigen::Vector2d Direction(size_t seg) const {
    return (points_[seg + 1] - points_[seg]).normalized();
  }

  std::vector<Eigen::Vector2d> points_;
  std::vector<double> cumulative_;
};

double HeadingOf(const Eigen::Vector2d& tangent) {
  return std::atan2(tangent.y(), tangent.x());
}

void ThrowConfig(const std::string& message) {
  throw Error(ErrorCode::kInvalidArgument, message);
}

}  // namespace

void WorldConfig::Validate() const {
  if (num_landmarks < 10) {
    throw Error(ErrorCode::kDegenerateWorld,
                "need at least 10 landmarks, got " + std::to_string(num_landmarks));
  }
  if (descriptor_dim < 4) ThrowConfig("descriptor_dim must be >= 4");
  if (num_map_views < 2) ThrowConfig("trajectory needs at least 2 map views");
  if (num_queries < 0) ThrowConfig("num_queries must be >= 0");
  if (!(visibility_radius > 0.0)) ThrowConfig("visibility_radius must be > 0");
  if (street.size() < 2) ThrowConfig("street needs at least two waypoints");
  for (size_t i = 1; i < street.size(); ++i) {
    if ((street[i] - street[i - 1]).norm() <= 0.0) {
      ThrowConfig("street waypoints must be distinct");
    }
  }
  if (!(lateral_min > 0.0 && lateral_max >= lateral_min)) {
    ThrowConfig("lateral band must satisfy 0 < lateral_min <= lateral_max");
  }
  if (height_max < height_min) ThrowConfig("height_max < height_min");
  if (min_visible < 4) ThrowConfig("min_visible must be >= 4");
  if (min_coobs < 1) ThrowConfig("min_coobs must be >= 1");
  if (map_noise.clutter_count < 0 || query_noise.clutter_count < 0 ||
      map_noise.keypoint_sigma < 0.0 || query_noise.keypoint_sigma < 0.0 ||
      map_noise.descriptor_sigma < 0.0 || query_noise.descriptor_sigma < 0.0) {
    ThrowConfig("render noise parameters must be non-negative");
  }
  intrinsics.Validate();
}

Eigen::Matrix3d BroadsideRotation(double heading, double yaw, double pitch,
                                  double roll) {
  const double look = heading + std::numbers::pi / 2.0 + yaw;
  const Eigen::Vector3d z(std::cos(look), std::sin(look), 0.0);
  const Eigen::Vector3d y(0.0, 0.0, -1.0);
  const Eigen::Vector3d x = y.cross(z);
  Eigen::Matrix3d base;
  base.col(0) = x;
  base.col(1) = y;
  base.col(2) = z;
  return base * Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitX()).toRotationMatrix() *
         Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

std::vector<int> VisibleLandmarks(std::span<const Landmark> landmarks,
                                  const CameraPose& pose,
                                  const CameraIntrinsics& intrinsics,
                                  double max_distance) {
  std::vector<int> visible;
  for (const auto& landmark : landmarks) {
    if ((landmark.position - pose.position).norm() > max_distance) continue;
    const auto pixel = intrinsics.Project(pose.ToCamera(landmark.position));
    if (pixel && intrinsics.Contains(*pixel)) visible.push_back(landmark.id);
  }
  std::sort(visible.begin(), visible.end());
  return visible;
}

ViewImage RenderView(std::span<const Landmark> landmarks, int view_id,
                     const CameraPose& pose, const CameraIntrinsics& intrinsics,
                     const RenderNoise& noise, uint64_t seed, double max_distance) {
  Rng rng = MakeRng(seed, {static_cast<uint64_t>(view_id)});
  ViewImage view;
  view.id = view_id;
  view.pose = pose;
  view.intrinsics = intrinsics;

  const int dim = landmarks.empty() ? 0 : static_cast<int>(landmarks[0].base_descriptor.size());
  for (const auto& landmark : landmarks) {
    if ((landmark.position - pose.position).norm() > max_distance) continue;
    const auto pixel = intrinsics.Project(pose.ToCamera(landmark.position));
    if (!pixel || !intrinsics.Contains(*pixel)) continue;

    LocalFeature feature;
    feature.keypoint = *pixel + GaussianVector(2, noise.keypoint_sigma, rng);
    feature.keypoint.x() = std::clamp(feature.keypoint.x(), 0.0,
                                      static_cast<double>(intrinsics.width));
    feature.keypoint.y() = std::clamp(feature.keypoint.y(), 0.0,
                                      static_cast<double>(intrinsics.height));
    if (noise.descriptor_sigma > 0.0) {
      feature.descriptor =
          (landmark.base_descriptor + GaussianVector(dim, noise.descriptor_sigma, rng))
              .normalized();
    } else {
      feature.descriptor = landmark.base_descriptor;
    }
    feature.landmark_id = landmark.id;
    view.features.push_back(std::move(feature));
  }
  if (view.features.empty()) {
    throw Error(ErrorCode::kNoVisibleLandmarks,
                "view " + std::to_string(view_id) + " sees no landmark");
  }

  std::uniform_real_distribution<double> ux(0.0, intrinsics.width);
  std::uniform_real_distribution<double> uy(0.0, intrinsics.height);
  for (int i = 0; i < noise.clutter_count; ++i) {
    LocalFeature clutter;
    clutter.keypoint = Eigen::Vector2d(ux(rng), uy(rng));
    clutter.descriptor = RandomUnitVector(dim, rng);
    view.features.push_back(std::move(clutter));
  }
  return view;
}

std::vector<MatchingPair> MakeMatchingPairs(std::span<const ViewImage> views,
                                            int min_coobs) {
  if (min_coobs < 1) {
    throw Error(ErrorCode::kInvalidArgument, "min_coobs must be >= 1");
  }
  std::vector<std::vector<int>> ids;
  ids.reserve(views.size());
  for (const auto& view : views) ids.push_back(view.LandmarkIds());

  std::vector<MatchingPair> pairs;
  for (size_t i = 0; i < views.size(); ++i) {
    for (size_t j = i + 1; j < views.size(); ++j) {
      const int count = CountShared(ids[i], ids[j]);
      if (count < min_coobs) continue;
      int a = views[i].id;
      int b = views[j].id;
      if (a > b) std::swap(a, b);
      pairs.push_back({a, b, count});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const MatchingPair& l, const MatchingPair& r) {
    return std::tie(l.a, l.b) < std::tie(r.a, r.b);
  });
  return pairs;
}

World GenerateWorld(const WorldConfig& config, uint64_t seed) {
  config.Validate();
  const Polyline street(config.street);
  const double length = street.length();

  World world;
  world.seed = seed;

  {
    Rng rng = MakeRng(seed, {1});
    std::uniform_real_distribution<double> along(-config.street_padding,
                                                 length + config.street_padding);
    std::uniform_real_distribution<double> lateral(config.lateral_min, config.lateral_max);
    std::uniform_real_distribution<double> height(config.height_min, config.height_max);
    for (int i = 0; i < config.num_landmarks; ++i) {
      const double s = along(rng);
      const Eigen::Vector2d tangent = street.TangentAt(s);
      const Eigen::Vector2d left(-tangent.y(), tangent.x());
      const Eigen::Vector2d ground = street.PointAt(s) + lateral(rng) * left;
      Landmark landmark;
      landmark.id = i;
      landmark.position = Eigen::Vector3d(ground.x(), ground.y(), height(rng));
      landmark.base_descriptor = RandomUnitVector(config.descriptor_dim, rng);
      world.landmarks.push_back(std::move(landmark));
    }
  }

  const uint64_t render_seed = MixSeed(seed, 3);
  auto check_visible = [&](const CameraPose& pose, int view_id) {
    const auto visible = VisibleLandmarks(world.landmarks, pose, config.intrinsics,
                                          config.visibility_radius);
    if (static_cast<int>(visible.size()) < config.min_visible) {
      throw Error(ErrorCode::kDegenerateWorld,
                  "view " + std::to_string(view_id) + " sees only " +
                      std::to_string(visible.size()) + " landmarks");
    }
  };

  const double spacing = length / (config.num_map_views - 1);
  for (int i = 0; i < config.num_map_views; ++i) {
    Rng rng = MakeRng(seed, {2, static_cast<uint64_t>(i)});
    std::normal_distribution<double> jitter(0.0, config.heading_jitter_deg * kDegToRad);
    const double s = i * spacing;
    const Eigen::Vector2d ground = street.PointAt(s);
    const double yaw = config.heading_jitter_deg > 0.0 ? jitter(rng) : 0.0;
    const CameraPose pose = CameraPose::FromMatrix(
        BroadsideRotation(HeadingOf(street.TangentAt(s)), yaw, 0.0, 0.0),
        Eigen::Vector3d(ground.x(), ground.y(), config.camera_height));
    check_visible(pose, i);
    world.map_views.push_back(RenderView(world.landmarks, i, pose, config.intrinsics,
                                         config.map_noise, render_seed,
                                         config.visibility_radius));
  }

  PromptSet prompts;
  if (!config.shifted_query_conditions.empty()) {
    prompts = DefaultPromptSet(config.descriptor_dim, config.prompt_seed);
    for (const auto& name : config.shifted_query_conditions) prompts.Find(name);
  }

  const int first_query = config.num_map_views;
  std::vector<ViewImage> shifted;
  for (int q = 0; q < config.num_queries; ++q) {
    const int id = first_query + q;
    Rng rng = MakeRng(seed, {5, static_cast<uint64_t>(q)});
    std::uniform_real_distribution<double> along(0.0, length);
    std::normal_distribution<double> offset(0.0, config.query_translation_sigma);
    const double rot_sigma = config.query_rotation_sigma_deg * kDegToRad;
    std::normal_distribution<double> angle(0.0, rot_sigma > 0.0 ? rot_sigma : 1.0);
    const double s = along(rng);
    const Eigen::Vector2d ground = street.PointAt(s);
    Eigen::Vector3d center(ground.x(), ground.y(), config.camera_height);
    if (config.query_translation_sigma > 0.0) {
      center += Eigen::Vector3d(offset(rng), offset(rng), 0.2 * offset(rng));
    }
    double yaw = 0.0;
    double pitch = 0.0;
    double roll = 0.0;
    if (rot_sigma > 0.0) {
      yaw = angle(rng);
      pitch = 0.5 * angle(rng);
      roll = 0.5 * angle(rng);
    }
    const CameraPose pose = CameraPose::FromMatrix(
        BroadsideRotation(HeadingOf(street.TangentAt(s)), yaw, pitch, roll), center);
    check_visible(pose, id);
    world.query_views.push_back(RenderView(world.landmarks, id, pose, config.intrinsics,
                                           config.query_noise, render_seed,
                                           config.visibility_radius));

    if (!config.shifted_query_conditions.empty()) {
      const int twin_id = first_query + config.num_queries + q;
      const auto& name =
          config.shifted_query_conditions[q % config.shifted_query_conditions.size()];
      const ViewImage twin = RenderView(world.landmarks, twin_id, pose, config.intrinsics,
                                        config.query_noise, render_seed,
                                        config.visibility_radius);
      shifted.push_back(ApplyVariant(twin, prompts.Find(name), MixSeed(seed, 4)));
    }
  }
  for (auto& view : shifted) world.query_views.push_back(std::move(view));

  world.matching_pairs = MakeMatchingPairs(world.map_views, config.min_coobs);
  return world;
}

}  // namespace synthloc
