#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "synthloc/types.h"

namespace synthloc {

// A named appearance change applied to a view: a fixed descriptor-space
// translation plus noise, feature dropout, and added clutter. Keypoints are
// left untouched unless keypoint_corruption_sigma > 0.
struct DomainShift {
  std::string name;
  Eigen::VectorXd descriptor_bias;  // unit direction
  double bias_gain = 0.0;
  double descriptor_noise_sigma = 0.0;
  double dropout_rate = 0.0;
  double clutter_rate = 0.0;
  double keypoint_corruption_sigma = 0.0;
  // Probability that a single generation fails outright: every original
  // feature is lost and the view is filled with clutter.
  double failure_rate = 0.0;

  void Validate() const;
};

struct PromptSet {
  std::vector<DomainShift> shifts;

  size_t size() const { return shifts.size(); }
  // Throws kInvalidArgument when absent.
  const DomainShift& Find(std::string_view name) const;
  int IndexOf(std::string_view name) const;  // -1 when absent
  std::vector<std::string> Names() const;
  void Validate() const;
};

// The eleven weather / season / time-of-day prompts, in canonical order.
const std::array<std::string_view, 11>& P11PromptNames();

bool IsNightPrompt(std::string_view name);

PromptSet DefaultPromptSet(int descriptor_dim, uint64_t seed);

// A shift with every parameter zero.
DomainShift IdentityShift(std::string name, int descriptor_dim);

ViewImage ApplyVariant(const ViewImage& view, const DomainShift& shift, uint64_t seed);

// Variants of every map view, one per prompt, in prompt-set order.
class VariantStore {
 public:
  VariantStore() = default;
  VariantStore(std::vector<std::string> prompt_names,
               std::map<int, std::vector<ViewImage>> variants);

  const std::vector<std::string>& prompt_names() const { return prompt_names_; }
  const std::map<int, std::vector<ViewImage>>& variants() const { return variants_; }
  size_t NumViews() const;

  // nullptr when the (view, prompt) combination is missing.
  const ViewImage* Find(int view_id, std::string_view prompt) const;

 private:
  std::vector<std::string> prompt_names_;
  std::map<int, std::vector<ViewImage>> variants_;
};

VariantStore GenerateAllVariants(const World& world, const PromptSet& prompts,
                                 uint64_t seed);

}  // namespace synthloc
