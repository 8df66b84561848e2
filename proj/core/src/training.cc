#include "synthloc/training.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "synthloc/error.h"

namespace synthloc {
namespace {

void Invalid(const std::string& message) {
  throw Error(ErrorCode::kInvalidArgument, message);
}

// Index drawn from `weights` (not necessarily normalized).
size_t DrawIndex(const std::vector<double>& weights, Rng& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::uniform_real_distribution<double> unit(0.0, total);
  const double u = unit(rng);
  double cumulative = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    cumulative += weights[i];
    if (u < cumulative && weights[i] > 0.0) return i;
  }
  for (size_t i = weights.size(); i > 0; --i) {
    if (weights[i - 1] > 0.0) return i - 1;
  }
  return 0;
}

std::vector<double> RawWeights(std::span<const TrainingTuple> family,
                               SamplingMode sampling) {
  std::vector<double> weights;
  weights.reserve(family.size());
  for (const auto& tuple : family) {
    if (sampling == SamplingMode::kUniform) {
      weights.push_back(1.0);
    } else {
      if (!(tuple.weight > 0.0)) {
        Invalid("geometry-aware sampling needs strictly positive consistency scores");
      }
      weights.push_back(1.0 / tuple.weight);
    }
  }
  return weights;
}

LossKind LossKindFor(TrainMode mode) {
  switch (mode) {
    case TrainMode::kBaseline:
    case TrainMode::kSwapPi:
      return LossKind::kContrastive;
    case TrainMode::kMultiK:
      return LossKind::kMulti;
    case TrainMode::kAggregatedK:
      return LossKind::kAggregated;
  }
  return LossKind::kContrastive;
}

}  // namespace

std::string_view TrainModeName(TrainMode mode) {
  switch (mode) {
    case TrainMode::kBaseline: return "baseline";
    case TrainMode::kSwapPi: return "swap_pi";
    case TrainMode::kMultiK: return "multi_k";
    case TrainMode::kAggregatedK: return "aggregated_k";
  }
  return "baseline";
}

TrainMode ParseTrainMode(std::string_view name) {
  for (const auto mode : {TrainMode::kBaseline, TrainMode::kSwapPi, TrainMode::kMultiK,
                          TrainMode::kAggregatedK}) {
    if (TrainModeName(mode) == name) return mode;
  }
  Invalid("unknown training mode '" + std::string(name) + "'");
  return TrainMode::kBaseline;
}

std::string_view SamplingModeName(SamplingMode mode) {
  return mode == SamplingMode::kUniform ? "uniform" : "geometry_aware";
}

SamplingMode ParseSamplingMode(std::string_view name) {
  if (name == "uniform") return SamplingMode::kUniform;
  if (name == "geometry_aware") return SamplingMode::kGeometryAware;
  Invalid("unknown sampling mode '" + std::string(name) + "'");
  return SamplingMode::kUniform;
}

void TrainConfig::Validate() const {
  if (!(margin > 0.0)) Invalid("margin must be > 0");
  if (!(learning_rate > 0.0)) Invalid("learning_rate must be > 0");
  if (weight_decay < 0.0) Invalid("weight_decay must be >= 0");
  if (episodes < 0) Invalid("episodes must be >= 0");
  if (pairs_per_episode < 1) Invalid("pairs_per_episode must be >= 1");
  if (num_negatives < 1) Invalid("num_negatives must be >= 1");
  if (negative_pool_size < num_negatives) Invalid("negative pool smaller than M");
  if (batch_size < 1) Invalid("batch_size must be >= 1");
  if (embed_dim < 1) Invalid("embed_dim must be >= 1");
  if (!(swap_probability >= 0.0 && swap_probability <= 1.0)) {
    Invalid("swap probability must lie in [0, 1]");
  }
  if (num_variants < 1) Invalid("K must be >= 1");
  if (k_multi < 0) Invalid("k_multi must be >= 0");
  if (c_tau < 0.0) Invalid("c_tau must be >= 0");
  if (sampling == SamplingMode::kGeometryAware && mode != TrainMode::kBaseline &&
      !(c_tau > 0.0)) {
    Invalid("geometry-aware sampling requires tuple filtering (c_tau > 0)");
  }
}

void ConsistencyTable::Set(int query_id, int positive_id, const std::string& prompt,
                           const ConsistencyScore& score) {
  scores_[{query_id, positive_id, prompt}] = score;
}

const ConsistencyScore* ConsistencyTable::Find(int query_id, int positive_id,
                                               const std::string& prompt) const {
  const auto it = scores_.find({query_id, positive_id, prompt});
  return it == scores_.end() ? nullptr : &it->second;
}

ConsistencyTable ComputeConsistencyTable(const World& world, const VariantStore& variants,
                                         const MatchParams& params) {
  ConsistencyTable table;
  for (const auto& pair : world.matching_pairs) {
    for (const auto& [q, p] : {std::pair(pair.a, pair.b), std::pair(pair.b, pair.a)}) {
      const ViewImage& query = world.MapView(q);
      const ViewImage& positive = world.MapView(p);
      for (const auto& prompt : variants.prompt_names()) {
        const ViewImage* variant = variants.Find(q, prompt);
        if (!variant) continue;
        table.Set(q, p, prompt, ComputeConsistencyScore(query, positive, *variant, params));
      }
    }
  }
  return table;
}

CoObservationIndex::CoObservationIndex(std::span<const ViewImage> views) {
  for (const auto& view : views) landmarks_[view.id] = view.LandmarkIds();
}

bool CoObservationIndex::ShareLandmarks(int view_a, int view_b) const {
  const auto a = landmarks_.find(view_a);
  const auto b = landmarks_.find(view_b);
  if (a == landmarks_.end() || b == landmarks_.end()) return false;
  return CountShared(a->second, b->second) > 0;
}

std::vector<int> MineNegatives(int query_id, int positive_id, std::span<const int> pool,
                               const DescriptorCache& descriptors, int count,
                               const CoObservationIndex& exclusion) {
  const auto query = descriptors.find(query_id);
  if (query == descriptors.end()) Invalid("no descriptor for the query");
  std::vector<std::pair<double, int>> candidates;
  for (const int id : pool) {
    if (id == query_id || id == positive_id) continue;
    if (exclusion.ShareLandmarks(id, query_id) || exclusion.ShareLandmarks(id, positive_id)) {
      continue;
    }
    const auto it = descriptors.find(id);
    if (it == descriptors.end()) Invalid("no descriptor for pool view " + std::to_string(id));
    candidates.emplace_back(query->second.dot(it->second), id);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  if (static_cast<int>(candidates.size()) < count) {
    throw Error(ErrorCode::kInsufficientNegatives,
                "only " + std::to_string(candidates.size()) + " eligible negatives for query " +
                    std::to_string(query_id));
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& l, const auto& r) {
    if (l.first != r.first) return l.first > r.first;
    return l.second < r.second;
  });
  std::vector<int> out;
  for (int i = 0; i < count; ++i) out.push_back(candidates[i].second);
  return out;
}

std::vector<int> MineNegatives(int query_id, int positive_id, std::span<const int> pool,
                               const ViewStore& views, const EmbeddingModel& model,
                               int count, const CoObservationIndex& exclusion) {
  DescriptorCache cache;
  cache[query_id] = Aggregate(views.Get(query_id, std::nullopt), model);
  for (const int id : pool) {
    if (!cache.count(id)) cache[id] = Aggregate(views.Get(id, std::nullopt), model);
  }
  return MineNegatives(query_id, positive_id, pool, cache, count, exclusion);
}

TrainingTuple BuildSyntheticTuple(const TrainingTuple& tuple, const std::string& prompt,
                                  const ViewStore& views, const ConsistencyScore& score,
                                  double c_tau, ThresholdMode mode) {
  if (!ValidatePair(score, c_tau, mode)) {
    throw Error(ErrorCode::kInvalidSyntheticPair,
                "'" + prompt + "' variant of view " + std::to_string(tuple.query_id) +
                    " fails validation");
  }
  if (!views.Has(tuple.query_id, prompt)) {
    throw Error(ErrorCode::kMissingVariant,
                "no '" + prompt + "' variant of query " + std::to_string(tuple.query_id));
  }
  for (const int n : tuple.negative_ids) {
    if (!views.Has(n, prompt)) {
      throw Error(ErrorCode::kMissingVariant,
                  "no '" + prompt + "' variant of negative " + std::to_string(n));
    }
  }
  TrainingTuple out = tuple;
  out.prompt = prompt;
  out.weight = std::clamp(score.value, 0.0, 1.0);
  return out;
}

std::vector<TrainingTuple> SyntheticFamily(const TrainingTuple& tuple,
                                           const ViewStore& views,
                                           const ConsistencyTable& scores, double c_tau,
                                           ThresholdMode mode) {
  std::vector<TrainingTuple> family;
  if (!views.variants()) return family;
  for (const auto& prompt : views.variants()->prompt_names()) {
    const ConsistencyScore* score = scores.Find(tuple.query_id, tuple.positive_id, prompt);
    if (!score || !ValidatePair(*score, c_tau, mode)) continue;
    try {
      family.push_back(BuildSyntheticTuple(tuple, prompt, views, *score, c_tau, mode));
    } catch (const Error& error) {
      if (error.code() != ErrorCode::kMissingVariant) throw;
    }
  }
  return family;
}

std::vector<double> SamplingProbabilities(std::span<const TrainingTuple> family,
                                          SamplingMode sampling) {
  std::vector<double> weights = RawWeights(family, sampling);
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (auto& w : weights) w /= total;
  return weights;
}

std::vector<TrainingTuple> SampleTuples(const TrainingTuple& original,
                                        std::span<const TrainingTuple> family,
                                        const TrainConfig& config, Rng& rng) {
  std::vector<TrainingTuple> out{original};
  if (config.mode == TrainMode::kBaseline || family.empty()) return out;

  std::vector<double> weights = RawWeights(family, config.sampling);
  if (config.mode == TrainMode::kSwapPi) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) < config.swap_probability) {
      out[0] = family[DrawIndex(weights, rng)];
    }
    return out;
  }

  int wanted = config.num_variants;
  if (config.mode == TrainMode::kMultiK && config.k_multi > 0) wanted = config.k_multi - 1;
  wanted = std::min<int>(wanted, static_cast<int>(family.size()));
  for (int draw = 0; draw < wanted; ++draw) {
    const size_t index = DrawIndex(weights, rng);
    out.push_back(family[index]);
    weights[index] = 0.0;
  }
  return out;
}

TrainResult Train(const World& world, const VariantStore* variants,
                  const ConsistencyTable* scores, const TrainConfig& config) {
  config.Validate();
  const int dim = world.DescriptorDim();
  if (config.embed_dim > dim) Invalid("embed_dim exceeds the descriptor dimension");
  const bool synthetic = config.mode != TrainMode::kBaseline;
  if (synthetic && (!variants || !scores)) {
    Invalid("synthetic training modes need variants and consistency scores");
  }

  TrainResult result;
  result.model = EmbeddingModel::Random(config.embed_dim, dim, config.seed);
  if (config.episodes == 0) return result;

  std::vector<std::pair<int, int>> oriented;
  for (const auto& pair : world.matching_pairs) {
    oriented.emplace_back(pair.a, pair.b);
    oriented.emplace_back(pair.b, pair.a);
  }
  if (oriented.empty()) Invalid("the world has no matching pairs to train on");

  std::vector<int> all_views;
  for (const auto& view : world.map_views) all_views.push_back(view.id);

  const ViewStore store(world.map_views, synthetic ? variants : nullptr);
  const CoObservationIndex exclusion(world.map_views);
  const LossKind loss_kind = LossKindFor(config.mode);
  Rng rng = MakeRng(config.seed, {0x7a11});

  const int steps_per_episode =
      (config.pairs_per_episode + config.batch_size - 1) / config.batch_size;
  const double total_steps = static_cast<double>(config.episodes) * steps_per_episode;
  int step = 0;
  Eigen::MatrixXd& w = result.model.mutable_projection();

  for (int episode = 0; episode < config.episodes; ++episode) {
    std::vector<std::pair<int, int>> pairs;
    if (static_cast<int>(oriented.size()) >= config.pairs_per_episode) {
      pairs = oriented;
      std::shuffle(pairs.begin(), pairs.end(), rng);
      pairs.resize(config.pairs_per_episode);
    } else {
      std::uniform_int_distribution<size_t> pick(0, oriented.size() - 1);
      for (int i = 0; i < config.pairs_per_episode; ++i) pairs.push_back(oriented[pick(rng)]);
    }
    std::vector<int> pool = all_views;
    if (static_cast<int>(pool.size()) > config.negative_pool_size) {
      std::shuffle(pool.begin(), pool.end(), rng);
      pool.resize(config.negative_pool_size);
      std::sort(pool.begin(), pool.end());
    }

    // Negatives are mined once per episode with the model at its start.
    DescriptorCache descriptors;
    for (const auto& view : world.map_views) {
      descriptors[view.id] = Aggregate(view, result.model);
    }

    double loss_sum = 0.0;
    int families = 0;
    int tuples_used = 0;
    int synthetic_used = 0;
    Eigen::MatrixXd batch_grad = Eigen::MatrixXd::Zero(w.rows(), w.cols());
    int batch_count = 0;

    auto apply_step = [&]() {
      if (batch_count == 0) return;
      const double progress = std::min(1.0, step / total_steps);
      const double lr =
          config.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
      w -= lr * (batch_grad / batch_count) + lr * config.weight_decay * w;
      ++step;
      batch_grad.setZero();
      batch_count = 0;
      if (!w.allFinite()) {
        throw Error(ErrorCode::kDiverged, "non-finite weights at episode " +
                                              std::to_string(episode));
      }
    };

    for (const auto& [q, p] : pairs) {
      TrainingTuple original;
      original.query_id = q;
      original.positive_id = p;
      try {
        original.negative_ids =
            MineNegatives(q, p, pool, descriptors, config.num_negatives, exclusion);
      } catch (const Error& error) {
        if (error.code() == ErrorCode::kInsufficientNegatives) continue;
        throw;
      }

      std::vector<TrainingTuple> family;
      if (synthetic) {
        family = SyntheticFamily(original, store, *scores, config.c_tau,
                                 config.threshold_mode);
      }
      const std::vector<TrainingTuple> sampled = SampleTuples(original, family, config, rng);
      for (const auto& tuple : sampled) synthetic_used += tuple.IsSynthetic() ? 1 : 0;
      tuples_used += static_cast<int>(sampled.size());

      const LossGradient lg =
          EvaluateLoss(loss_kind, sampled, store, result.model, config.margin, true);
      if (!std::isfinite(lg.loss)) {
        throw Error(ErrorCode::kDiverged,
                    "non-finite loss at episode " + std::to_string(episode));
      }
      loss_sum += lg.loss;
      ++families;
      batch_grad += lg.gradient;
      if (++batch_count == config.batch_size) apply_step();
    }
    apply_step();

    if (families == 0) {
      throw Error(ErrorCode::kInsufficientNegatives,
                  "no training pair has enough eligible negatives");
    }
    EpisodeStats stats;
    stats.episode = episode;
    stats.mean_loss = loss_sum / families;
    stats.synth_fraction =
        tuples_used > 0 ? static_cast<double>(synthetic_used) / tuples_used : 0.0;
    result.trace.push_back(stats);
  }
  return result;
}

EmbeddingModel AverageModels(std::span<const EmbeddingModel> models) {
  if (models.empty()) Invalid("cannot average zero models");
  Eigen::MatrixXd sum = models[0].projection();
  for (size_t i = 1; i < models.size(); ++i) {
    if (models[i].embed_dim() != sum.rows() || models[i].descriptor_dim() != sum.cols()) {
      throw Error(ErrorCode::kDimensionMismatch, "models have different shapes");
    }
    sum += models[i].projection();
  }
  return EmbeddingModel(sum / static_cast<double>(models.size()));
}

FeatureDiagnostics ComputeFeatureDiagnostics(std::span<const ViewImage> views,
                                             const VariantStore* variants,
                                             const EmbeddingModel& model, double alpha,
                                             double t) {
  FeatureDiagnostics out;
  std::vector<Eigen::VectorXd> embeddings;
  embeddings.reserve(views.size());
  for (const auto& view : views) embeddings.push_back(Aggregate(view, model));

  if (variants) {
    double sum = 0.0;
    int count = 0;
    for (size_t i = 0; i < views.size(); ++i) {
      const auto it = variants->variants().find(views[i].id);
      if (it == variants->variants().end()) continue;
      for (const auto& variant : it->second) {
        sum += std::pow((embeddings[i] - Aggregate(variant, model)).norm(), alpha);
        ++count;
      }
    }
    if (count > 0) out.alignment = sum / count;
  }

  double sum = 0.0;
  int count = 0;
  for (size_t i = 0; i < embeddings.size(); ++i) {
    for (size_t j = i + 1; j < embeddings.size(); ++j) {
      sum += std::exp(-t * (embeddings[i] - embeddings[j]).squaredNorm());
      ++count;
    }
  }
  if (count > 0) out.uniformity = std::log(sum / count);
  return out;
}

}  // namespace synthloc
