#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "synthloc/embed.h"
#include "synthloc/types.h"

namespace synthloc {

struct Codebook {
  Eigen::MatrixXd centroids;        // C x e
  std::vector<double> sse_history;  // within-cluster SSE after each assignment step

  int size() const { return static_cast<int>(centroids.rows()); }
  int dim() const { return static_cast<int>(centroids.cols()); }
  // Nearest centroid; ties go to the lower index.
  int Assign(const Eigen::VectorXd& x) const;
  void Validate() const;
};

// k-means with k-means++ seeding and a fixed number of Lloyd iterations.
// Clusters that empty out are re-seeded from the point farthest from its
// centroid. Throws kTooFewVectors when there are fewer vectors than clusters.
Codebook TrainCodebook(std::span<const Eigen::VectorXd> vectors, int num_clusters,
                       int iterations, uint64_t seed);

// W * descriptor for every local feature of the view.
std::vector<Eigen::VectorXd> ProjectFeatures(const ViewImage& view,
                                             const EmbeddingModel& model);

// Per-cell sign bits of the aggregated residual, packed 64 per word. Bit k is
// set when component k is negative.
struct AsmkSignature {
  int dim = 0;
  std::map<int, std::vector<uint64_t>> cells;
  int dropped_cells = 0;  // cells whose residual sum vanished

  bool empty() const { return cells.empty(); }
};

AsmkSignature AsmkAggregate(std::span<const Eigen::VectorXd> vectors,
                            const Codebook& codebook);
AsmkSignature AsmkAggregate(const ViewImage& view, const EmbeddingModel& model,
                            const Codebook& codebook);

// Normalized agreement of two binary vectors in [-1, 1].
double BinaryAgreement(const std::vector<uint64_t>& a, const std::vector<uint64_t>& b,
                       int dim);

// Selective kernel over shared cells: sum of sign(u)|u|^alpha for
// u >= sel_threshold, divided by sqrt(|cells_a| |cells_b|).
double AsmkScore(const AsmkSignature& a, const AsmkSignature& b, double alpha = 3.0,
                 double sel_threshold = 0.0);

struct RankedEntry {
  int view_id = 0;
  double score = 0.0;

  bool operator==(const RankedEntry&) const = default;
};

// Ordered by descending score, then ascending view id.
using RankedList = std::vector<RankedEntry>;

void SortRanking(RankedList* ranking);

enum class RetrievalBackend { kGlobalCosine, kAsmk };

std::string_view BackendName(RetrievalBackend backend);
RetrievalBackend ParseBackend(std::string_view name);

struct AsmkParams {
  int num_clusters = 64;
  int iterations = 20;
  double alpha = 3.0;
  double sel_threshold = 0.0;
  uint64_t seed = 0;

  void Validate() const;
};

// Exhaustive-scan index over a database of views.
class RetrievalIndex {
 public:
  // The ASMK codebook is trained on the database's projected features.
  static RetrievalIndex Build(std::span<const ViewImage> database,
                              const EmbeddingModel& model, RetrievalBackend backend,
                              const AsmkParams& params = {});
  // Uses a codebook trained elsewhere.
  static RetrievalIndex BuildWithCodebook(std::span<const ViewImage> database,
                                          const EmbeddingModel& model, Codebook codebook,
                                          const AsmkParams& params = {});

  // Top-k database views; the full ranking when k exceeds the database.
  RankedList Retrieve(const ViewImage& query, int k) const;

  RetrievalBackend backend() const { return backend_; }
  int size() const { return static_cast<int>(ids_.size()); }
  const Codebook& codebook() const { return codebook_; }

 private:
  RetrievalIndex() = default;

  RetrievalBackend backend_ = RetrievalBackend::kGlobalCosine;
  EmbeddingModel model_;
  AsmkParams params_;
  std::vector<int> ids_;
  std::vector<Eigen::VectorXd> embeddings_;
  Codebook codebook_;
  std::vector<AsmkSignature> signatures_;
};

}  // namespace synthloc
