#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "synthloc/types.h"
#include "synthloc/variants.h"

namespace synthloc {

// Linear projection of local descriptors (d) into the embedding space (e).
class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  explicit EmbeddingModel(Eigen::MatrixXd projection);

  // Entries i.i.d. Gaussian with standard deviation 1 / sqrt(d).
  static EmbeddingModel Random(int embed_dim, int descriptor_dim, uint64_t seed);
  // The first `embed_dim` rows of the identity.
  static EmbeddingModel IdentityTruncation(int embed_dim, int descriptor_dim);

  const Eigen::MatrixXd& projection() const { return projection_; }
  Eigen::MatrixXd& mutable_projection() { return projection_; }
  int embed_dim() const { return static_cast<int>(projection_.rows()); }
  int descriptor_dim() const { return static_cast<int>(projection_.cols()); }
  bool IsFinite() const { return projection_.allFinite(); }

 private:
  Eigen::MatrixXd projection_;
};

struct AggregateResult {
  Eigen::VectorXd embedding;
  // The weighted sum vanished; embedding is the first basis vector.
  bool degenerate = false;
};

// Global descriptor of a view: the mean of projected local features weighted
// by their norms, l2-normalized.
AggregateResult AggregateDetailed(const ViewImage& view, const EmbeddingModel& model);
Eigen::VectorXd Aggregate(const ViewImage& view, const EmbeddingModel& model);

// Adds d_embedding^T * d(Aggregate)/dW to `grad`.
void BackpropAggregate(const ViewImage& view, const EmbeddingModel& model,
                       const Eigen::VectorXd& d_embedding, Eigen::MatrixXd* grad);

// (query, positive, negatives). Synthetic tuples name the prompt whose
// variants replace the query and every negative; the positive stays original.
struct TrainingTuple {
  int query_id = 0;
  int positive_id = 0;
  std::vector<int> negative_ids;
  std::optional<std::string> prompt;
  double weight = 1.0;

  bool IsSynthetic() const { return prompt.has_value(); }
  void Validate() const;
};

// Resolves (view id, prompt) to original views or their variants.
class ViewStore {
 public:
  ViewStore(std::span<const ViewImage> originals, const VariantStore* variants);

  // Throws kMissingVariant / kInvalidArgument for unknown combinations.
  const ViewImage& Get(int view_id, const std::optional<std::string>& prompt) const;
  bool Has(int view_id, const std::optional<std::string>& prompt) const;

  const VariantStore* variants() const { return variants_; }
  std::span<const ViewImage> originals() const { return originals_; }

 private:
  std::span<const ViewImage> originals_;
  const VariantStore* variants_;
  std::vector<int> index_;  // view id -> position in originals_, -1 if absent
};

enum class LossKind { kContrastive, kMulti, kAggregated };

struct LossGradient {
  double loss = 0.0;
  Eigen::MatrixXd gradient;  // e x d, zero when not requested
};

// Contrastive loss with margin on squared distances of global descriptors.
double LossContrastive(const TrainingTuple& tuple, const ViewStore& views,
                       const EmbeddingModel& model, double margin);

// Weighted sum of per-tuple contrastive terms (the positive term scaled by
// each tuple's weight), divided by the number of tuples.
double LossMulti(std::span<const TrainingTuple> tuples, const ViewStore& views,
                 const EmbeddingModel& model, double margin);

// One contrastive loss on averaged descriptors. tuples[0] is the original
// tuple, the rest are its synthetic substitutions sharing the positive.
double LossAggregated(std::span<const TrainingTuple> family, const ViewStore& views,
                      const EmbeddingModel& model, double margin);

// Loss and its exact gradient with respect to the projection matrix. For
// kContrastive exactly one tuple is expected.
LossGradient EvaluateLoss(LossKind kind, std::span<const TrainingTuple> tuples,
                          const ViewStore& views, const EmbeddingModel& model,
                          double margin, bool with_gradient = true);

Eigen::MatrixXd Gradient(LossKind kind, std::span<const TrainingTuple> tuples,
                         const ViewStore& views, const EmbeddingModel& model,
                         double margin);

}  // namespace synthloc
