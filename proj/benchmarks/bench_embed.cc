#include <benchmark/benchmark.h>

#include <vector>

#include "bench_common.h"
#include "synthloc/embed.h"

namespace synthloc {
namespace {

void BM_Aggregate(benchmark::State& state) {
  Rng rng = MakeRng(1);
  const ViewImage view = bench::RandomView(0, static_cast<int>(state.range(0)), 32, rng);
  const EmbeddingModel model = EmbeddingModel::Random(16, 32, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Aggregate(view, model));
}
BENCHMARK(BM_Aggregate)->Arg(20)->Arg(80);

void BM_LossGradient(benchmark::State& state) {
  const auto kind = static_cast<LossKind>(state.range(0));
  Rng rng = MakeRng(3);
  std::vector<ViewImage> views;
  for (int id = 0; id < 7; ++id) views.push_back(bench::RandomView(id, 40, 32, rng));
  const ViewStore store(views, nullptr);
  TrainingTuple t;
  t.query_id = 0;
  t.positive_id = 1;
  t.negative_ids = {2, 3, 4, 5, 6};
  const std::vector<TrainingTuple> tuples = {t};
  const EmbeddingModel model = EmbeddingModel::Random(16, 32, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(EvaluateLoss(kind, tuples, store, model, 0.7, true));
  }
}
BENCHMARK(BM_LossGradient)
    ->Arg(static_cast<int>(LossKind::kContrastive))
    ->Arg(static_cast<int>(LossKind::kMulti))
    ->Arg(static_cast<int>(LossKind::kAggregated));

}  // namespace
}  // namespace synthloc
