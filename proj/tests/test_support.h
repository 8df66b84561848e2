#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "synthloc/embed.h"
#include "synthloc/random.h"
#include "synthloc/types.h"
#include "synthloc/variants.h"
#include "synthloc/worldgen.h"

namespace synthloc::testing {

// A view of `n` features with random unit descriptors and uniform keypoints.
// Feature i carries landmark id `first_landmark + i` when `with_landmarks`.
inline ViewImage RandomView(int id, int n, int dim, Rng& rng, bool with_landmarks = true,
                            int first_landmark = 0) {
  ViewImage view;
  view.id = id;
  std::uniform_real_distribution<double> u(0.0, view.intrinsics.width);
  std::uniform_real_distribution<double> v(0.0, view.intrinsics.height);
  for (int i = 0; i < n; ++i) {
    LocalFeature f;
    f.keypoint = Eigen::Vector2d(u(rng), v(rng));
    f.descriptor = RandomUnitVector(dim, rng);
    if (with_landmarks) f.landmark_id = first_landmark + i;
    view.features.push_back(std::move(f));
  }
  return view;
}

// Small but non-degenerate street world for fast tests.
inline WorldConfig SmallWorldConfig() {
  WorldConfig config;
  config.num_landmarks = 200;
  config.num_map_views = 12;
  config.num_queries = 4;
  return config;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path TempDir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("synthloc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Relative path -> contents for every regular file under `dir`.
inline std::map<std::string, std::string> Snapshot(const std::filesystem::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) {
      files[std::filesystem::relative(entry.path(), dir).string()] = ReadFile(entry.path());
    }
  }
  return files;
}

// A small random loss problem: six views, two prompts, one tuple family.
struct LossInstance {
  std::vector<ViewImage> originals;
  VariantStore variants;
  std::vector<TrainingTuple> tuples;
  EmbeddingModel model;
  double margin = 0.7;
};

// `kind` picks the family shape: one tuple for kContrastive, the original
// plus one or two synthetic tuples otherwise.
inline LossInstance RandomLossInstance(LossKind kind, Rng& rng, int dim = 8, int embed = 4) {
  LossInstance inst;
  std::uniform_int_distribution<int> features(2, 6);
  for (int id = 0; id < 6; ++id) {
    inst.originals.push_back(RandomView(id, features(rng), dim, rng, true, 10 * id));
  }
  const std::vector<std::string> prompts = {"p0", "p1"};
  std::map<int, std::vector<ViewImage>> variants;
  for (const auto& view : inst.originals) {
    for (const auto& name : prompts) {
      DomainShift shift = IdentityShift(name, dim);
      shift.descriptor_bias = RandomUnitVector(dim, rng);
      shift.bias_gain = 0.5;
      shift.descriptor_noise_sigma = 0.1;
      variants[view.id].push_back(ApplyVariant(view, shift, rng()));
    }
  }
  inst.variants = VariantStore(prompts, std::move(variants));

  std::uniform_real_distribution<double> unit(0.05, 1.0);
  std::uniform_real_distribution<double> margins(0.3, 2.5);
  inst.margin = margins(rng);
  TrainingTuple original;
  original.query_id = 0;
  original.positive_id = 1;
  original.negative_ids = {2, 3, 4, 5};
  std::shuffle(original.negative_ids.begin(), original.negative_ids.end(), rng);
  original.negative_ids.resize(std::uniform_int_distribution<int>(1, 4)(rng));
  inst.tuples.push_back(original);
  if (kind != LossKind::kContrastive) {
    const int k = std::uniform_int_distribution<int>(1, 2)(rng);
    for (int i = 0; i < k; ++i) {
      TrainingTuple synthetic = original;
      synthetic.prompt = prompts[i];
      synthetic.weight = unit(rng);
      inst.tuples.push_back(synthetic);
    }
  }
  inst.model = EmbeddingModel::Random(embed, dim, rng());
  return inst;
}

// Smallest |margin - squared distance| over every hinge of the instance,
// so callers can skip problems that sit on a kink.
inline double HingeClearance(LossKind kind, const LossInstance& inst) {
  const ViewStore views(inst.originals, &inst.variants);
  auto f = [&](int id, const std::optional<std::string>& prompt) {
    return Aggregate(views.Get(id, prompt), inst.model);
  };
  double clearance = 1e9;
  if (kind == LossKind::kAggregated) {
    auto phi = [&](auto&& member) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(inst.model.embed_dim());
      for (const auto& t : inst.tuples) sum += member(t);
      return Eigen::VectorXd(sum.normalized());
    };
    const Eigen::VectorXd q = phi([&](const TrainingTuple& t) { return f(t.query_id, t.prompt); });
    for (size_t m = 0; m < inst.tuples[0].negative_ids.size(); ++m) {
      const Eigen::VectorXd n =
          phi([&](const TrainingTuple& t) { return f(t.negative_ids[m], t.prompt); });
      clearance = std::min(clearance, std::abs(inst.margin - (q - n).squaredNorm()));
    }
    return clearance;
  }
  for (const auto& t : inst.tuples) {
    const Eigen::VectorXd q = f(t.query_id, t.prompt);
    for (const int n : t.negative_ids) {
      clearance = std::min(clearance, std::abs(inst.margin - (q - f(n, t.prompt)).squaredNorm()));
    }
  }
  return clearance;
}

// Largest entrywise relative difference between the analytic gradient and
// central finite differences with step `h`. Entries are compared relative to
// max(|analytic|, |numeric|, 1e-6).
inline double GradientRelativeError(LossKind kind, const LossInstance& inst, double h = 1e-5) {
  const ViewStore views(inst.originals, &inst.variants);
  const Eigen::MatrixXd analytic = Gradient(kind, inst.tuples, views, inst.model, inst.margin);
  double worst = 0.0;
  for (Eigen::Index r = 0; r < analytic.rows(); ++r) {
    for (Eigen::Index c = 0; c < analytic.cols(); ++c) {
      EmbeddingModel plus = inst.model;
      EmbeddingModel minus = inst.model;
      plus.mutable_projection()(r, c) += h;
      minus.mutable_projection()(r, c) -= h;
      const double lp = EvaluateLoss(kind, inst.tuples, views, plus, inst.margin, false).loss;
      const double lm = EvaluateLoss(kind, inst.tuples, views, minus, inst.margin, false).loss;
      const double numeric = (lp - lm) / (2.0 * h);
      const double scale = std::max({std::abs(analytic(r, c)), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(analytic(r, c) - numeric) / scale);
    }
  }
  return worst;
}

}  // namespace synthloc::testing
