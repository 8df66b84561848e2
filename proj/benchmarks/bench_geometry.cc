#include <benchmark/benchmark.h>

#include "bench_common.h"
#include "synthloc/geometry.h"
#include "synthloc/variants.h"

namespace synthloc {
namespace {

void BM_MatchFeatures(benchmark::State& state) {
  Rng rng = MakeRng(1);
  const int n = static_cast<int>(state.range(0));
  const ViewImage a = bench::RandomView(0, n, 32, rng);
  const ViewImage b = bench::RandomView(1, n, 32, rng);
  for (auto _ : state) benchmark::DoNotOptimize(MatchFeatures(a, b, MatchParams{}));
  state.SetComplexityN(n);
}
BENCHMARK(BM_MatchFeatures)->RangeMultiplier(2)->Range(16, 256)->Complexity();

void BM_ConsistencyScore(benchmark::State& state) {
  Rng rng = MakeRng(2);
  const ViewImage q = bench::RandomView(0, 60, 32, rng);
  ViewImage p = q;
  p.id = 1;
  const DomainShift shift = DefaultPromptSet(32, 0).Find("at night");
  const ViewImage variant = ApplyVariant(q, shift, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ComputeConsistencyScore(q, p, variant, MatchParams{}));
  }
}
BENCHMARK(BM_ConsistencyScore);

}  // namespace
}  // namespace synthloc
