#include "synthloc/embed.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "synthloc/error.h"
#include "synthloc/random.h"

namespace synthloc {
namespace {

// Embeddings of the views touched by a loss evaluation, with their
// accumulated upstream gradients.
class Tape {
 public:
  Tape(const ViewStore& views, const EmbeddingModel& model)
      : views_(views), model_(model) {}

  int Slot(int view_id, const std::optional<std::string>& prompt) {
    const auto key = std::make_pair(view_id, prompt.value_or(std::string()));
    const auto it = index_.find(key);
    if (it != index_.end()) return it->second;
    Entry entry;
    entry.view = &views_.Get(view_id, prompt);
    entry.embedding = Aggregate(*entry.view, model_);
    entry.d_embedding = Eigen::VectorXd::Zero(entry.embedding.size());
    entries_.push_back(std::move(entry));
    const int slot = static_cast<int>(entries_.size()) - 1;
    index_.emplace(key, slot);
    return slot;
  }

  const Eigen::VectorXd& embedding(int slot) const { return entries_[slot].embedding; }
  Eigen::VectorXd& d_embedding(int slot) { return entries_[slot].d_embedding; }

  Eigen::MatrixXd Backprop() const {
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(model_.embed_dim(), model_.descriptor_dim());
    for (const auto& entry : entries_) {
      if (entry.d_embedding.isZero(0.0)) continue;
      BackpropAggregate(*entry.view, model_, entry.d_embedding, &grad);
    }
    return grad;
  }

 private:
  struct Entry {
    const ViewImage* view = nullptr;
    Eigen::VectorXd embedding;
    Eigen::VectorXd d_embedding;
  };

  const ViewStore& views_;
  const EmbeddingModel& model_;
  std::map<std::pair<int, std::string>, int> index_;
  std::vector<Entry> entries_;
};

// Upstream gradients of one contrastive term; null pointers skip the
// accumulation.
struct TermGrads {
  Eigen::VectorXd* query = nullptr;
  Eigen::VectorXd* positive = nullptr;
  std::vector<Eigen::VectorXd*> negatives;
};

double ContrastiveTerm(const Eigen::VectorXd& fq, const Eigen::VectorXd& fp,
                       const std::vector<const Eigen::VectorXd*>& fns, double weight,
                       double margin, TermGrads* grads) {
  const Eigen::VectorXd diff_p = fq - fp;
  double loss = weight * diff_p.squaredNorm();
  if (grads) {
    *grads->query += 2.0 * weight * diff_p;
    *grads->positive -= 2.0 * weight * diff_p;
  }
  for (size_t j = 0; j < fns.size(); ++j) {
    const Eigen::VectorXd diff_n = fq - *fns[j];
    const double hinge = margin - diff_n.squaredNorm();
    // Subgradient 0 at the kink.
    if (hinge <= 0.0) continue;
    loss += hinge;
    if (grads) {
      *grads->query -= 2.0 * diff_n;
      *grads->negatives[j] += 2.0 * diff_n;
    }
  }
  return loss;
}

// Average of unit descriptors, renormalized. A singleton is returned as is.
struct SetAggregate {
  std::vector<int> slots;
  Eigen::VectorXd value;
  double mean_norm = 1.0;
  bool degenerate = false;
};

SetAggregate AggregateSet(const Tape& tape, std::vector<int> slots) {
  SetAggregate out;
  out.slots = std::move(slots);
  if (out.slots.size() == 1) {
    out.value = tape.embedding(out.slots[0]);
    return out;
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(tape.embedding(out.slots[0]).size());
  for (const int slot : out.slots) mean += tape.embedding(slot);
  mean /= static_cast<double>(out.slots.size());
  out.mean_norm = mean.norm();
  if (out.mean_norm == 0.0) {
    out.degenerate = true;
    out.value = Eigen::VectorXd::Unit(mean.size(), 0);
    return out;
  }
  out.value = mean / out.mean_norm;
  return out;
}

void BackpropSet(const SetAggregate& set, const Eigen::VectorXd& d_value, Tape* tape) {
  if (set.slots.size() == 1) {
    tape->d_embedding(set.slots[0]) += d_value;
    return;
  }
  if (set.degenerate) return;
  const Eigen::VectorXd d_mean =
      (d_value - set.value * set.value.dot(d_value)) / set.mean_norm;
  const Eigen::VectorXd d_member = d_mean / static_cast<double>(set.slots.size());
  for (const int slot : set.slots) tape->d_embedding(slot) += d_member;
}

void CheckMargin(double margin) {
  if (!(margin > 0.0)) throw Error(ErrorCode::kInvalidArgument, "margin must be > 0");
}

double TupleLoss(const TrainingTuple& tuple, double weight, double margin, Tape* tape,
                 bool with_gradient) {
  tuple.Validate();
  const int q = tape->Slot(tuple.query_id, tuple.prompt);
  const int p = tape->Slot(tuple.positive_id, std::nullopt);
  std::vector<int> negatives;
  for (const int n : tuple.negative_ids) negatives.push_back(tape->Slot(n, tuple.prompt));

  std::vector<const Eigen::VectorXd*> fns;
  for (const int n : negatives) fns.push_back(&tape->embedding(n));
  if (!with_gradient) {
    return ContrastiveTerm(tape->embedding(q), tape->embedding(p), fns, weight, margin,
                           nullptr);
  }
  TermGrads grads;
  grads.query = &tape->d_embedding(q);
  grads.positive = &tape->d_embedding(p);
  for (const int n : negatives) grads.negatives.push_back(&tape->d_embedding(n));
  return ContrastiveTerm(tape->embedding(q), tape->embedding(p), fns, weight, margin,
                         &grads);
}

double MultiLoss(std::span<const TrainingTuple> tuples, double margin, Tape* tape,
                 bool with_gradient) {
  if (tuples.empty()) throw Error(ErrorCode::kEmptyTupleSet, "loss over zero tuples");
  double sum = 0.0;
  for (const auto& tuple : tuples) {
    sum += TupleLoss(tuple, tuple.weight, margin, tape, with_gradient);
  }
  // The matching 1/k on the gradient is applied after backprop.
  return sum / static_cast<double>(tuples.size());
}

void CheckFamily(std::span<const TrainingTuple> family) {
  if (family.empty()) throw Error(ErrorCode::kEmptyTupleSet, "empty tuple family");
  const auto& original = family[0];
  for (const auto& tuple : family) {
    tuple.Validate();
    if (tuple.positive_id != original.positive_id ||
        tuple.query_id != original.query_id ||
        tuple.negative_ids.size() != original.negative_ids.size()) {
      throw Error(ErrorCode::kMismatchedTupleFamily,
                  "synthetic tuples must share the original's query, positive and "
                  "negative count");
    }
  }
}

double AggregatedLoss(std::span<const TrainingTuple> family, double margin, Tape* tape,
                      bool with_gradient) {
  CheckFamily(family);
  std::vector<int> q_slots;
  std::vector<int> p_slots;
  const size_t num_negatives = family[0].negative_ids.size();
  std::vector<std::vector<int>> n_slots(num_negatives);
  for (const auto& tuple : family) {
    q_slots.push_back(tape->Slot(tuple.query_id, tuple.prompt));
    p_slots.push_back(tape->Slot(tuple.positive_id, std::nullopt));
    for (size_t m = 0; m < num_negatives; ++m) {
      n_slots[m].push_back(tape->Slot(tuple.negative_ids[m], tuple.prompt));
    }
  }
  const SetAggregate q_set = AggregateSet(*tape, std::move(q_slots));
  const SetAggregate p_set = AggregateSet(*tape, std::move(p_slots));
  std::vector<SetAggregate> n_sets;
  for (auto& slots : n_slots) n_sets.push_back(AggregateSet(*tape, std::move(slots)));

  std::vector<const Eigen::VectorXd*> fns;
  for (const auto& set : n_sets) fns.push_back(&set.value);
  if (!with_gradient) {
    return ContrastiveTerm(q_set.value, p_set.value, fns, 1.0, margin, nullptr);
  }

  const Eigen::Index dim = q_set.value.size();
  Eigen::VectorXd dq = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd dp = Eigen::VectorXd::Zero(dim);
  std::vector<Eigen::VectorXd> dns(num_negatives, Eigen::VectorXd::Zero(dim));
  TermGrads grads;
  grads.query = &dq;
  grads.positive = &dp;
  for (auto& dn : dns) grads.negatives.push_back(&dn);
  const double loss = ContrastiveTerm(q_set.value, p_set.value, fns, 1.0, margin, &grads);

  BackpropSet(q_set, dq, tape);
  BackpropSet(p_set, dp, tape);
  for (size_t m = 0; m < num_negatives; ++m) BackpropSet(n_sets[m], dns[m], tape);
  return loss;
}

}  // namespace

EmbeddingModel::EmbeddingModel(Eigen::MatrixXd projection)
    : projection_(std::move(projection)) {}

EmbeddingModel EmbeddingModel::Random(int embed_dim, int descriptor_dim, uint64_t seed) {
  if (embed_dim < 1 || descriptor_dim < 1 || embed_dim > descriptor_dim) {
    throw Error(ErrorCode::kInvalidArgument,
                "embedding needs 1 <= e <= d, got e=" + std::to_string(embed_dim) +
                    " d=" + std::to_string(descriptor_dim));
  }
  Rng rng = MakeRng(seed, {0x5eed});
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(descriptor_dim));
  Eigen::MatrixXd w(embed_dim, descriptor_dim);
  for (int r = 0; r < embed_dim; ++r) {
    for (int c = 0; c < descriptor_dim; ++c) w(r, c) = normal(rng);
  }
  return EmbeddingModel(std::move(w));
}

EmbeddingModel EmbeddingModel::IdentityTruncation(int embed_dim, int descriptor_dim) {
  return EmbeddingModel(Eigen::MatrixXd::Identity(embed_dim, descriptor_dim));
}

AggregateResult AggregateDetailed(const ViewImage& view, const EmbeddingModel& model) {
  const int e = model.embed_dim();
  AggregateResult result;
  Eigen::VectorXd weighted = Eigen::VectorXd::Zero(e);
  double total = 0.0;
  for (const auto& feature : view.features) {
    if (feature.descriptor.size() != model.descriptor_dim()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "descriptor dimension does not match the model");
    }
    const Eigen::VectorXd z = model.projection() * feature.descriptor;
    const double norm = z.norm();
    weighted += norm * z;
    total += norm;
  }
  if (total > 0.0) {
    const Eigen::VectorXd mean = weighted / total;
    const double norm = mean.norm();
    if (norm > 0.0) {
      result.embedding = mean / norm;
      return result;
    }
  }
  result.degenerate = true;
  result.embedding = Eigen::VectorXd::Unit(e, 0);
  return result;
}

Eigen::VectorXd Aggregate(const ViewImage& view, const EmbeddingModel& model) {
  return AggregateDetailed(view, model).embedding;
}

void BackpropAggregate(const ViewImage& view, const EmbeddingModel& model,
                       const Eigen::VectorXd& d_embedding, Eigen::MatrixXd* grad) {
  const int e = model.embed_dim();
  const size_t n = view.features.size();
  Eigen::MatrixXd z(e, static_cast<Eigen::Index>(n));
  Eigen::VectorXd norms(static_cast<Eigen::Index>(n));
  Eigen::VectorXd weighted = Eigen::VectorXd::Zero(e);
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    z.col(i) = model.projection() * view.features[i].descriptor;
    norms[i] = z.col(i).norm();
    weighted += norms[i] * z.col(i);
    total += norms[i];
  }
  if (total <= 0.0) return;
  const Eigen::VectorXd mean = weighted / total;
  const double mean_norm = mean.norm();
  if (mean_norm <= 0.0) return;
  const Eigen::VectorXd f = mean / mean_norm;

  // f = g / |g|, g = N / S, N = sum r_i z_i, S = sum r_i, r_i = |z_i|.
  const Eigen::VectorXd d_mean = (d_embedding - f * f.dot(d_embedding)) / mean_norm;
  const Eigen::VectorXd d_weighted = d_mean / total;
  const double d_total = -d_mean.dot(mean) / total;

  for (size_t i = 0; i < n; ++i) {
    if (norms[i] <= 0.0) continue;
    const Eigen::VectorXd zi = z.col(i);
    const Eigen::VectorXd d_z =
        norms[i] * d_weighted + ((d_weighted.dot(zi) + d_total) / norms[i]) * zi;
    grad->noalias() += d_z * view.features[i].descriptor.transpose();
  }
}

void TrainingTuple::Validate() const {
  if (negative_ids.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "tuple needs at least one negative");
  }
  for (const int n : negative_ids) {
    if (n == query_id || n == positive_id) {
      throw Error(ErrorCode::kInvalidArgument,
                  "negative " + std::to_string(n) + " repeats the query or positive");
    }
  }
  if (!(weight >= 0.0 && weight <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "tuple weight must lie in [0, 1]");
  }
}

ViewStore::ViewStore(std::span<const ViewImage> originals, const VariantStore* variants)
    : originals_(originals), variants_(variants) {
  int max_id = -1;
  for (const auto& view : originals_) max_id = std::max(max_id, view.id);
  index_.assign(static_cast<size_t>(max_id + 1), -1);
  for (size_t i = 0; i < originals_.size(); ++i) {
    if (originals_[i].id >= 0) index_[originals_[i].id] = static_cast<int>(i);
  }
}

bool ViewStore::Has(int view_id, const std::optional<std::string>& prompt) const {
  if (prompt) return variants_ && variants_->Find(view_id, *prompt) != nullptr;
  return view_id >= 0 && view_id < static_cast<int>(index_.size()) && index_[view_id] >= 0;
}

const ViewImage& ViewStore::Get(int view_id, const std::optional<std::string>& prompt) const {
  if (prompt) {
    const ViewImage* variant = variants_ ? variants_->Find(view_id, *prompt) : nullptr;
    if (!variant) {
      throw Error(ErrorCode::kMissingVariant,
                  "no '" + *prompt + "' variant of view " + std::to_string(view_id));
    }
    return *variant;
  }
  if (!Has(view_id, std::nullopt)) {
    throw Error(ErrorCode::kInvalidArgument, "unknown view id " + std::to_string(view_id));
  }
  return originals_[index_[view_id]];
}

double LossContrastive(const TrainingTuple& tuple, const ViewStore& views,
                       const EmbeddingModel& model, double margin) {
  return EvaluateLoss(LossKind::kContrastive, std::span(&tuple, 1), views, model, margin,
                      false)
      .loss;
}

double LossMulti(std::span<const TrainingTuple> tuples, const ViewStore& views,
                 const EmbeddingModel& model, double margin) {
  return EvaluateLoss(LossKind::kMulti, tuples, views, model, margin, false).loss;
}

double LossAggregated(std::span<const TrainingTuple> family, const ViewStore& views,
                      const EmbeddingModel& model, double margin) {
  return EvaluateLoss(LossKind::kAggregated, family, views, model, margin, false).loss;
}

LossGradient EvaluateLoss(LossKind kind, std::span<const TrainingTuple> tuples,
                          const ViewStore& views, const EmbeddingModel& model,
                          double margin, bool with_gradient) {
  CheckMargin(margin);
  Tape tape(views, model);
  LossGradient out;
  switch (kind) {
    case LossKind::kContrastive:
      if (tuples.size() != 1) {
        throw Error(ErrorCode::kInvalidArgument, "contrastive loss takes one tuple");
      }
      out.loss = TupleLoss(tuples[0], 1.0, margin, &tape, with_gradient);
      break;
    case LossKind::kMulti:
      out.loss = MultiLoss(tuples, margin, &tape, with_gradient);
      break;
    case LossKind::kAggregated:
      out.loss = AggregatedLoss(tuples, margin, &tape, with_gradient);
      break;
  }
  if (with_gradient) {
    out.gradient = tape.Backprop();
    if (kind == LossKind::kMulti) out.gradient /= static_cast<double>(tuples.size());
  } else {
    out.gradient = Eigen::MatrixXd::Zero(model.embed_dim(), model.descriptor_dim());
  }
  return out;
}

Eigen::MatrixXd Gradient(LossKind kind, std::span<const TrainingTuple> tuples,
                         const ViewStore& views, const EmbeddingModel& model,
                         double margin) {
  return EvaluateLoss(kind, tuples, views, model, margin, true).gradient;
}

}  // namespace synthloc
