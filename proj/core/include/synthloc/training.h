#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "synthloc/embed.h"
#include "synthloc/geometry.h"
#include "synthloc/random.h"
#include "synthloc/types.h"
#include "synthloc/variants.h"

namespace synthloc {

enum class TrainMode { kBaseline, kSwapPi, kMultiK, kAggregatedK };
enum class SamplingMode { kUniform, kGeometryAware };

std::string_view TrainModeName(TrainMode mode);
TrainMode ParseTrainMode(std::string_view name);
std::string_view SamplingModeName(SamplingMode mode);
SamplingMode ParseSamplingMode(std::string_view name);

struct TrainConfig {
  double margin = 0.7;
  double learning_rate = 0.2;
  double weight_decay = 1e-4;
  int episodes = 30;
  int pairs_per_episode = 200;
  int negative_pool_size = 2000;
  int num_negatives = 5;  // M
  int batch_size = 5;     // tuples per gradient step
  int embed_dim = 16;
  TrainMode mode = TrainMode::kAggregatedK;
  double swap_probability = 0.5;  // pi
  int num_variants = 2;           // K
  // Size of the jointly used pair subset in multi_k mode, original included;
  // 0 means num_variants + 1.
  int k_multi = 0;
  double c_tau = 0.2;
  ThresholdMode threshold_mode = ThresholdMode::kRelative;
  SamplingMode sampling = SamplingMode::kUniform;
  uint64_t seed = 0;

  void Validate() const;
};

// Consistency scores keyed by (query id, positive id, prompt).
class ConsistencyTable {
 public:
  void Set(int query_id, int positive_id, const std::string& prompt,
           const ConsistencyScore& score);
  const ConsistencyScore* Find(int query_id, int positive_id,
                               const std::string& prompt) const;
  size_t size() const { return scores_.size(); }
  const std::map<std::tuple<int, int, std::string>, ConsistencyScore>& entries() const {
    return scores_;
  }

 private:
  std::map<std::tuple<int, int, std::string>, ConsistencyScore> scores_;
};

// Scores every matching pair in both orientations under every prompt.
ConsistencyTable ComputeConsistencyTable(const World& world, const VariantStore& variants,
                                         const MatchParams& params);

// Which views share at least one landmark.
class CoObservationIndex {
 public:
  explicit CoObservationIndex(std::span<const ViewImage> views);
  bool ShareLandmarks(int view_a, int view_b) const;

 private:
  std::unordered_map<int, std::vector<int>> landmarks_;
};

using DescriptorCache = std::unordered_map<int, Eigen::VectorXd>;

// The `count` pool views with the highest cosine similarity to the query
// among those sharing no landmark with the query or the positive. Ties go to
// the lower view id.
std::vector<int> MineNegatives(int query_id, int positive_id, std::span<const int> pool,
                               const DescriptorCache& descriptors, int count,
                               const CoObservationIndex& exclusion);
std::vector<int> MineNegatives(int query_id, int positive_id, std::span<const int> pool,
                               const ViewStore& views, const EmbeddingModel& model,
                               int count, const CoObservationIndex& exclusion);

// Replaces the query and every negative by their `prompt` variants. The
// weight becomes the pair's consistency score.
TrainingTuple BuildSyntheticTuple(const TrainingTuple& tuple, const std::string& prompt,
                                  const ViewStore& views, const ConsistencyScore& score,
                                  double c_tau,
                                  ThresholdMode mode = ThresholdMode::kRelative);

// Valid synthetic tuples of `tuple` over every prompt in the store, in prompt
// order. Prompts without a score or failing validation are skipped.
std::vector<TrainingTuple> SyntheticFamily(const TrainingTuple& tuple,
                                           const ViewStore& views,
                                           const ConsistencyTable& scores,
                                           double c_tau, ThresholdMode mode);

// Probability of each family member on a single draw: uniform, or
// proportional to 1 / weight for geometry-aware sampling.
std::vector<double> SamplingProbabilities(std::span<const TrainingTuple> family,
                                          SamplingMode sampling);

// Tuples used for one training step. Never fails: without valid synthetic
// tuples only the original is returned.
std::vector<TrainingTuple> SampleTuples(const TrainingTuple& original,
                                        std::span<const TrainingTuple> family,
                                        const TrainConfig& config, Rng& rng);

struct EpisodeStats {
  int episode = 0;
  double mean_loss = 0.0;
  double synth_fraction = 0.0;
};

struct TrainResult {
  EmbeddingModel model;
  std::vector<EpisodeStats> trace;
};

// Episodic training over the world's matching pairs. `variants` and `scores`
// may be null in baseline mode.
TrainResult Train(const World& world, const VariantStore* variants,
                  const ConsistencyTable* scores, const TrainConfig& config);

EmbeddingModel AverageModels(std::span<const EmbeddingModel> models);

struct FeatureDiagnostics {
  double alignment = 0.0;
  double uniformity = 0.0;
};

// Alignment over (view, variant) pairs and uniformity over distinct pairs of
// the given views.
FeatureDiagnostics ComputeFeatureDiagnostics(std::span<const ViewImage> views,
                                             const VariantStore* variants,
                                             const EmbeddingModel& model,
                                             double alpha = 2.0, double t = 2.0);

}  // namespace synthloc
