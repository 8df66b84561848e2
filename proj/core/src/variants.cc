#include "synthloc/variants.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "synthloc/error.h"
#include "synthloc/random.h"

namespace synthloc {
namespace {

struct ShiftPreset {
  std::string_view name;
  double bias_gain;
  double noise_sigma;
  double dropout_rate;
  double clutter_rate;
  double failure_rate;
};

// Night prompts carry the largest bias and dropout. "at sunset" and "with sun"
// fail more often than the rest.
constexpr std::array<ShiftPreset, 11> kP11Presets = {{
    {"at dawn", 0.45, 0.04, 0.10, 0.10, 0.08},
    {"at dusk", 0.55, 0.04, 0.12, 0.10, 0.10},
    {"at noon", 0.25, 0.03, 0.05, 0.05, 0.03},
    {"at sunset", 0.60, 0.05, 0.15, 0.15, 0.30},
    {"in winter", 0.50, 0.05, 0.15, 0.15, 0.08},
    {"in summer", 0.30, 0.03, 0.05, 0.05, 0.03},
    {"with rain", 0.55, 0.06, 0.15, 0.20, 0.08},
    {"with snow", 0.65, 0.06, 0.20, 0.20, 0.10},
    {"with sun", 0.35, 0.04, 0.08, 0.08, 0.20},
    {"at night with rain", 1.30, 0.07, 0.30, 0.25, 0.15},
    {"at night", 1.20, 0.06, 0.28, 0.20, 0.12},
}};

size_t CeilCount(double rate, size_t n) {
  if (rate <= 0.0 || n == 0) return 0;
  return static_cast<size_t>(std::ceil(rate * static_cast<double>(n) - 1e-9));
}

LocalFeature MakeClutter(const CameraIntrinsics& intrinsics, int dim, Rng& rng) {
  std::uniform_real_distribution<double> ux(0.0, intrinsics.width);
  std::uniform_real_distribution<double> uy(0.0, intrinsics.height);
  LocalFeature feature;
  feature.keypoint = Eigen::Vector2d(ux(rng), uy(rng));
  feature.descriptor = RandomUnitVector(dim, rng);
  return feature;
}

}  // namespace

void DomainShift::Validate() const {
  if (name.empty()) throw Error(ErrorCode::kInvalidArgument, "shift needs a name");
  if (!(dropout_rate >= 0.0 && dropout_rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "dropout_rate of '" + name + "' must lie in [0, 1]");
  }
  if (!(failure_rate >= 0.0 && failure_rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "failure_rate of '" + name + "' must lie in [0, 1]");
  }
  if (clutter_rate < 0.0 || bias_gain < 0.0 || descriptor_noise_sigma < 0.0 ||
      keypoint_corruption_sigma < 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "shift '" + name + "' has a negative parameter");
  }
}

const DomainShift& PromptSet::Find(std::string_view name) const {
  const int index = IndexOf(name);
  if (index < 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "unknown prompt '" + std::string(name) + "'");
  }
  return shifts[index];
}

int PromptSet::IndexOf(std::string_view name) const {
  for (size_t i = 0; i < shifts.size(); ++i) {
    if (shifts[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::string> PromptSet::Names() const {
  std::vector<std::string> names;
  for (const auto& shift : shifts) names.push_back(shift.name);
  return names;
}

void PromptSet::Validate() const {
  std::set<std::string> seen;
  for (const auto& shift : shifts) {
    shift.Validate();
    if (!seen.insert(shift.name).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate prompt '" + shift.name + "'");
    }
  }
}

const std::array<std::string_view, 11>& P11PromptNames() {
  static const std::array<std::string_view, 11> names = [] {
    std::array<std::string_view, 11> out{};
    for (size_t i = 0; i < kP11Presets.size(); ++i) out[i] = kP11Presets[i].name;
    return out;
  }();
  return names;
}

bool IsNightPrompt(std::string_view name) {
  return name.find("night") != std::string_view::npos;
}

PromptSet DefaultPromptSet(int descriptor_dim, uint64_t seed) {
  if (descriptor_dim < 1) {
    throw Error(ErrorCode::kInvalidArgument, "descriptor dimension must be positive");
  }
  PromptSet set;
  for (const auto& preset : kP11Presets) {
    Rng rng = MakeRng(seed, {HashString(preset.name)});
    DomainShift shift;
    shift.name = std::string(preset.name);
    shift.descriptor_bias = RandomUnitVector(descriptor_dim, rng);
    shift.bias_gain = preset.bias_gain;
    shift.descriptor_noise_sigma = preset.noise_sigma;
    shift.dropout_rate = preset.dropout_rate;
    shift.clutter_rate = preset.clutter_rate;
    shift.failure_rate = preset.failure_rate;
    set.shifts.push_back(std::move(shift));
  }
  return set;
}

DomainShift IdentityShift(std::string name, int descriptor_dim) {
  DomainShift shift;
  shift.name = std::move(name);
  shift.descriptor_bias = Eigen::VectorXd::Zero(descriptor_dim);
  return shift;
}

ViewImage ApplyVariant(const ViewImage& view, const DomainShift& shift, uint64_t seed) {
  if (!view.IsOriginal()) {
    throw Error(ErrorCode::kAlreadySynthetic,
                "view " + std::to_string(view.id) + " has condition '" +
                    view.condition + "'");
  }
  shift.Validate();
  const int dim = view.DescriptorDim();
  const bool biased = shift.bias_gain > 0.0;
  if (biased && shift.descriptor_bias.size() != dim) {
    throw Error(ErrorCode::kDimensionMismatch, "shift bias does not match descriptors");
  }

  Rng rng = MakeRng(seed, {static_cast<uint64_t>(view.id), HashString(shift.name)});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool failed = shift.failure_rate > 0.0 && unit(rng) < shift.failure_rate;

  ViewImage out;
  out.id = view.id;
  out.pose = view.pose;
  out.intrinsics = view.intrinsics;
  out.condition = shift.name;
  out.features.reserve(view.features.size());

  const bool perturb_descriptor = biased || shift.descriptor_noise_sigma > 0.0;
  for (const auto& feature : view.features) {
    // One draw per feature regardless of outcome keeps the stream aligned.
    const double u = unit(rng);
    if (failed || u < shift.dropout_rate) continue;

    LocalFeature moved = feature;
    if (perturb_descriptor) {
      Eigen::VectorXd d = feature.descriptor;
      if (biased) d += shift.bias_gain * shift.descriptor_bias;
      d += GaussianVector(dim, shift.descriptor_noise_sigma, rng);
      const double norm = d.norm();
      moved.descriptor = norm > 0.0 ? Eigen::VectorXd(d / norm) : d;
    }
    if (shift.keypoint_corruption_sigma > 0.0) {
      const Eigen::Vector2d offset = GaussianVector(2, shift.keypoint_corruption_sigma, rng);
      moved.keypoint += offset;
      moved.keypoint.x() = std::clamp(moved.keypoint.x(), 0.0,
                                      static_cast<double>(view.intrinsics.width));
      moved.keypoint.y() = std::clamp(moved.keypoint.y(), 0.0,
                                      static_cast<double>(view.intrinsics.height));
    }
    out.features.push_back(std::move(moved));
  }

  size_t clutter = CeilCount(shift.clutter_rate, view.features.size());
  if (failed) clutter = std::max(clutter, view.features.size());
  if (out.features.empty() && clutter == 0) clutter = 1;
  for (size_t i = 0; i < clutter; ++i) {
    out.features.push_back(MakeClutter(view.intrinsics, dim, rng));
  }
  return out;
}

VariantStore::VariantStore(std::vector<std::string> prompt_names,
                           std::map<int, std::vector<ViewImage>> variants)
    : prompt_names_(std::move(prompt_names)), variants_(std::move(variants)) {}

size_t VariantStore::NumViews() const {
  size_t n = 0;
  for (const auto& [id, list] : variants_) n += list.size();
  return n;
}

const ViewImage* VariantStore::Find(int view_id, std::string_view prompt) const {
  const auto it = variants_.find(view_id);
  if (it == variants_.end()) return nullptr;
  for (const auto& view : it->second) {
    if (view.condition == prompt) return &view;
  }
  return nullptr;
}

VariantStore GenerateAllVariants(const World& world, const PromptSet& prompts,
                                 uint64_t seed) {
  prompts.Validate();
  std::map<int, std::vector<ViewImage>> variants;
  for (const auto& view : world.map_views) {
    auto& list = variants[view.id];
    list.reserve(prompts.size());
    for (const auto& shift : prompts.shifts) {
      list.push_back(ApplyVariant(view, shift, seed));
    }
  }
  return VariantStore(prompts.Names(), std::move(variants));
}

}  // namespace synthloc
