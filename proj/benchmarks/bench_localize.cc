#include <benchmark/benchmark.h>

#include <map>
#include <random>
#include <vector>

#include "synthloc/localize.h"
#include "synthloc/random.h"

namespace synthloc {
namespace {

std::vector<Correspondence2d3d> Planted(int inliers, int outliers, Rng& rng) {
  const CameraIntrinsics k;
  const CameraPose pose;
  std::uniform_real_distribution<double> px(0.0, k.width);
  std::uniform_real_distribution<double> py(0.0, k.height);
  std::uniform_real_distribution<double> depth(4.0, 30.0);
  std::vector<Correspondence2d3d> out;
  for (int i = 0; i < inliers + outliers; ++i) {
    Correspondence2d3d c;
    c.pixel = Eigen::Vector2d(px(rng), py(rng));
    c.point = pose.ToWorld(k.Unproject(c.pixel) * depth(rng));
    if (i >= inliers) c.pixel = Eigen::Vector2d(px(rng), py(rng));
    out.push_back(c);
  }
  return out;
}

void BM_PnpRansac(benchmark::State& state) {
  Rng rng = MakeRng(1);
  const auto corrs = Planted(20, static_cast<int>(state.range(0)), rng);
  RansacParams params;
  params.inlier_px = 2.0;
  for (auto _ : state) benchmark::DoNotOptimize(PnpRansac(corrs, CameraIntrinsics{}, params));
}
BENCHMARK(BM_PnpRansac)->Arg(0)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_EwbPose(benchmark::State& state) {
  Rng rng = MakeRng(2);
  std::map<int, CameraPose> poses;
  RankedList ranked;
  for (int id = 0; id < 10; ++id) {
    poses[id] = CameraPose::FromQuaternion(
        Eigen::Quaterniond(Eigen::Vector4d(GaussianVector(4, 1.0, rng)).normalized()),
        GaussianVector(3, 5.0, rng));
    ranked.push_back({id, 1.0 - 0.1 * id});
  }
  for (auto _ : state) benchmark::DoNotOptimize(EwbPose(ranked, poses, 10));
}
BENCHMARK(BM_EwbPose);

}  // namespace
}  // namespace synthloc
