#pragma once

#include <random>

#include "synthloc/random.h"
#include "synthloc/types.h"

namespace synthloc::bench {

inline ViewImage RandomView(int id, int n, int dim, Rng& rng) {
  ViewImage view;
  view.id = id;
  std::uniform_real_distribution<double> u(0.0, view.intrinsics.width);
  std::uniform_real_distribution<double> v(0.0, view.intrinsics.height);
  for (int i = 0; i < n; ++i) {
    LocalFeature f;
    f.keypoint = Eigen::Vector2d(u(rng), v(rng));
    f.descriptor = RandomUnitVector(dim, rng);
    f.landmark_id = 1000 * id + i;
    view.features.push_back(std::move(f));
  }
  return view;
}

}  // namespace synthloc::bench
