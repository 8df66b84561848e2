#pragma once

// Brute-force reference implementations shared by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "synthloc/index.h"
#include "synthloc/random.h"
#include "synthloc/types.h"
#include "test_support.h"

namespace synthloc::testing {

using Pairs = std::vector<std::pair<int, int>>;

// O(n^2) mutual nearest neighbours with the ratio test on both sides.
inline Pairs BruteMutualNn(const ViewImage& a, const ViewImage& b, double ratio) {
  const int na = static_cast<int>(a.features.size());
  const int nb = static_cast<int>(b.features.size());
  auto dist = [&](int i, int j) {
    return (a.features[i].descriptor - b.features[j].descriptor).norm();
  };
  auto best_two = [ratio](const std::vector<double>& d, int* arg) {
    double best = std::numeric_limits<double>::infinity();
    double second = best;
    *arg = -1;
    for (int k = 0; k < static_cast<int>(d.size()); ++k) {
      if (d[k] < best) {
        second = best;
        best = d[k];
        *arg = k;
      } else if (d[k] < second) {
        second = d[k];
      }
    }
    return std::isinf(second) || best < ratio * second;
  };
  Pairs out;
  for (int i = 0; i < na; ++i) {
    std::vector<double> row(nb);
    for (int j = 0; j < nb; ++j) row[j] = dist(i, j);
    int j = -1;
    if (!best_two(row, &j)) continue;
    std::vector<double> col(na);
    for (int k = 0; k < na; ++k) col[k] = dist(k, j);
    int back = -1;
    if (!best_two(col, &back) || back != i) continue;
    out.emplace_back(i, j);
  }
  return out;
}

// Keypoints of p that belong to area-restricted correspondences.
// `a` is the matched view; the area comes from the original query `q`.
inline std::vector<int> AreaPSide(const Pairs& pairs, const ViewImage& a, const ViewImage& q,
                           const ViewImage& p) {
  const auto ids_q = q.LandmarkIds();
  const auto ids_p = p.LandmarkIds();
  std::set<int> area;
  std::set_intersection(ids_q.begin(), ids_q.end(), ids_p.begin(), ids_p.end(),
                        std::inserter(area, area.begin()));
  std::vector<int> out;
  for (const auto& [i, j] : pairs) {
    const auto& fq = a.features[i];
    const auto& fp = p.features[j];
    if (fq.landmark_id && fp.landmark_id && area.count(*fq.landmark_id) &&
        area.count(*fp.landmark_id)) {
      out.push_back(j);
    }
  }
  return out;
}

// Query view and a positive that shares its first `shared` landmarks.
inline std::pair<ViewImage, ViewImage> OverlappingPair(Rng& rng, int n, int shared, int dim) {
  ViewImage q = RandomView(0, n, dim, rng);
  ViewImage p = RandomView(1, n, dim, rng, true, n - shared + 1000);
  for (int i = 0; i < shared; ++i) {
    p.features[i].landmark_id = i;
    p.features[i].descriptor =
        (q.features[i].descriptor + GaussianVector(dim, 0.05, rng)).normalized();
  }
  return {q, p};
}

inline double MinKeypointGap(const ViewImage& view) {
  double gap = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < view.features.size(); ++i) {
    for (size_t j = i + 1; j < view.features.size(); ++j) {
      gap = std::min(gap, (view.features[i].keypoint - view.features[j].keypoint).norm());
    }
  }
  return gap;
}

// Random signature over `cells` distinct cells of a C = 16 codebook.
inline AsmkSignature RandomSignature(int dim, int cells, Rng& rng) {
  AsmkSignature sig;
  sig.dim = dim;
  std::vector<int> ids(16);
  std::iota(ids.begin(), ids.end(), 0);
  std::shuffle(ids.begin(), ids.end(), rng);
  const size_t words = (dim + 63) / 64;
  for (int c = 0; c < cells; ++c) {
    std::vector<uint64_t> bits(words, 0);
    for (int k = 0; k < dim; ++k) {
      if (rng() & 1) bits[k / 64] |= uint64_t{1} << (k % 64);
    }
    sig.cells[ids[c]] = bits;
  }
  return sig;
}

}  // namespace synthloc::testing
