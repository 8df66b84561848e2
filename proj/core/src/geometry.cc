#include "synthloc/geometry.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "synthloc/error.h"

namespace synthloc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Neighbor {
  int index = -1;
  double best = kInf;
  double second = kInf;
};

double SquaredDistance(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  double sum = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double diff = x[k] - y[k];
    sum += diff * diff;
  }
  return sum;
}

void Offer(Neighbor* n, int index, double distance) {
  if (distance < n->best) {
    n->second = n->best;
    n->best = distance;
    n->index = index;
  } else if (distance < n->second) {
    n->second = distance;
  }
}

bool PassesRatio(const Neighbor& n, double ratio) {
  if (!std::isfinite(n.second)) return true;
  return std::sqrt(n.best) < ratio * std::sqrt(n.second);
}

// Landmark ids visible in both views.
std::vector<int> CoObserved(const ViewImage& a, const ViewImage& b) {
  const auto ids_a = a.LandmarkIds();
  const auto ids_b = b.LandmarkIds();
  std::vector<int> shared;
  std::set_intersection(ids_a.begin(), ids_a.end(), ids_b.begin(), ids_b.end(),
                        std::back_inserter(shared));
  return shared;
}

bool InArea(const LocalFeature& feature, const std::vector<int>& area) {
  return feature.landmark_id &&
         std::binary_search(area.begin(), area.end(), *feature.landmark_id);
}

std::vector<std::pair<int, int>> RestrictToArea(const Correspondences& corrs,
                                                const ViewImage& a, const ViewImage& b,
                                                const std::vector<int>& area) {
  std::vector<std::pair<int, int>> kept;
  for (const auto& [i, j] : corrs.pairs) {
    if (InArea(a.features[i], area) && InArea(b.features[j], area)) {
      kept.emplace_back(i, j);
    }
  }
  return kept;
}

// Maximum one-to-one pairing of `left` and `right` p-side keypoints lying
// within `tol` pixels of each other (augmenting paths).
int MaxKeypointPairing(const std::vector<Eigen::Vector2d>& left,
                       const std::vector<Eigen::Vector2d>& right, double tol) {
  std::vector<std::vector<int>> adjacency(left.size());
  for (size_t i = 0; i < left.size(); ++i) {
    for (size_t j = 0; j < right.size(); ++j) {
      if ((left[i] - right[j]).norm() <= tol) adjacency[i].push_back(static_cast<int>(j));
    }
  }
  std::vector<int> owner(right.size(), -1);
  int matched = 0;
  for (size_t i = 0; i < left.size(); ++i) {
    std::vector<char> seen(right.size(), 0);
    std::function<bool(int)> augment = [&](int u) {
      for (const int v : adjacency[u]) {
        if (seen[v]) continue;
        seen[v] = 1;
        if (owner[v] < 0 || augment(owner[v])) {
          owner[v] = u;
          return true;
        }
      }
      return false;
    };
    if (augment(static_cast<int>(i))) ++matched;
  }
  return matched;
}

}  // namespace

Correspondences MatchFeatures(const ViewImage& a, const ViewImage& b,
                              const MatchParams& params) {
  Correspondences out;
  out.method = "mutual_nn_ratio";
  const int na = static_cast<int>(a.features.size());
  const int nb = static_cast<int>(b.features.size());
  if (na == 0 || nb == 0) return out;
  if (a.DescriptorDim() != b.DescriptorDim()) {
    throw Error(ErrorCode::kDimensionMismatch, "descriptor dimensions differ");
  }

  std::vector<Neighbor> from_a(na);
  std::vector<Neighbor> from_b(nb);
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nb; ++j) {
      const double d = SquaredDistance(a.features[i].descriptor, b.features[j].descriptor);
      Offer(&from_a[i], j, d);
      Offer(&from_b[j], i, d);
    }
  }
  for (int i = 0; i < na; ++i) {
    const int j = from_a[i].index;
    if (j < 0 || from_b[j].index != i) continue;
    if (PassesRatio(from_a[i], params.ratio) && PassesRatio(from_b[j], params.ratio)) {
      out.pairs.emplace_back(i, j);
    }
  }
  return out;
}

Correspondences VerifyIdentity(const Correspondences& corrs, const ViewImage& a,
                               const ViewImage& b, double pixel_tol) {
  Correspondences out;
  out.method = corrs.method + "+identity";
  for (const auto& [i, j] : corrs.pairs) {
    if ((a.features[i].keypoint - b.features[j].keypoint).norm() <= pixel_tol) {
      out.pairs.emplace_back(i, j);
    }
  }
  return out;
}

ConsistencyScore ComputeConsistencyScore(const ViewImage& q, const ViewImage& p,
                                         const ViewImage& q_variant,
                                         const MatchParams& params) {
  if (q_variant.IsOriginal()) {
    throw Error(ErrorCode::kInvalidArgument,
                "consistency score needs a synthetic variant of the query");
  }
  const auto area = CoObserved(q, p);
  const auto reference = RestrictToArea(MatchFeatures(q, p, params), q, p, area);
  const auto substituted =
      RestrictToArea(MatchFeatures(q_variant, p, params), q_variant, p, area);

  std::vector<Eigen::Vector2d> reference_keys;
  std::vector<Eigen::Vector2d> substituted_keys;
  for (const auto& [i, j] : reference) reference_keys.push_back(p.features[j].keypoint);
  for (const auto& [i, j] : substituted) substituted_keys.push_back(p.features[j].keypoint);

  ConsistencyScore score;
  score.original = static_cast<int>(reference.size());
  if (score.original == 0) return score;
  score.kept = MaxKeypointPairing(substituted_keys, reference_keys, params.pixel_tol);
  score.value = static_cast<double>(score.kept) / score.original;
  return score;
}

bool ValidatePair(const ConsistencyScore& score, double c_tau, ThresholdMode mode) {
  if (mode == ThresholdMode::kAbsolute) return score.kept >= c_tau;
  return score.value >= c_tau;
}

ConsistencyScore SelfConsistency(const ViewImage& x, const ViewImage& x_variant,
                                 const MatchParams& params) {
  const auto verified =
      VerifyIdentity(MatchFeatures(x, x_variant, params), x, x_variant, params.pixel_tol);
  ConsistencyScore score;
  score.original = x.NumLandmarkFeatures();
  for (const auto& [i, j] : verified.pairs) {
    if (x.features[i].landmark_id) ++score.kept;
  }
  if (score.original > 0) {
    score.value = static_cast<double>(score.kept) / score.original;
  }
  return score;
}

}  // namespace synthloc
