#include <benchmark/benchmark.h>

#include <vector>

#include "bench_common.h"
#include "synthloc/index.h"

namespace synthloc {
namespace {

std::vector<ViewImage> Database(int n, Rng& rng) {
  std::vector<ViewImage> db;
  for (int id = 0; id < n; ++id) db.push_back(bench::RandomView(id, 40, 32, rng));
  return db;
}

void BM_Retrieve(benchmark::State& state) {
  const auto backend = static_cast<RetrievalBackend>(state.range(0));
  Rng rng = MakeRng(1);
  const auto db = Database(40, rng);
  const RetrievalIndex index =
      RetrievalIndex::Build(db, EmbeddingModel::Random(16, 32, 2), backend);
  const ViewImage query = bench::RandomView(99, 40, 32, rng);
  for (auto _ : state) benchmark::DoNotOptimize(index.Retrieve(query, 10));
}
BENCHMARK(BM_Retrieve)
    ->Arg(static_cast<int>(RetrievalBackend::kGlobalCosine))
    ->Arg(static_cast<int>(RetrievalBackend::kAsmk));

void BM_AsmkScore(benchmark::State& state) {
  Rng rng = MakeRng(3);
  const auto db = Database(2, rng);
  const EmbeddingModel model = EmbeddingModel::Random(16, 32, 4);
  std::vector<Eigen::VectorXd> vectors = ProjectFeatures(db[0], model);
  const auto more = ProjectFeatures(db[1], model);
  vectors.insert(vectors.end(), more.begin(), more.end());
  const Codebook codebook = TrainCodebook(vectors, 16, 20, 5);
  const AsmkSignature a = AsmkAggregate(db[0], model, codebook);
  const AsmkSignature b = AsmkAggregate(db[1], model, codebook);
  for (auto _ : state) benchmark::DoNotOptimize(AsmkScore(a, b));
}
BENCHMARK(BM_AsmkScore);

}  // namespace
}  // namespace synthloc
