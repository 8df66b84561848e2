#include "synthloc/index.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "synthloc/error.h"
#include "synthloc/random.h"

namespace synthloc {
namespace {

void Invalid(const std::string& message) {
  throw Error(ErrorCode::kInvalidArgument, message);
}

double Sse(std::span<const Eigen::VectorXd> vectors, const Eigen::MatrixXd& centroids,
           const std::vector<int>& labels) {
  double sum = 0.0;
  for (size_t i = 0; i < vectors.size(); ++i) {
    sum += (vectors[i] - centroids.row(labels[i]).transpose()).squaredNorm();
  }
  return sum;
}

Eigen::MatrixXd SeedPlusPlus(std::span<const Eigen::VectorXd> vectors, int num_clusters,
                             Rng& rng) {
  const size_t n = vectors.size();
  const Eigen::Index dim = vectors[0].size();
  Eigen::MatrixXd centroids(num_clusters, dim);
  std::vector<char> chosen(n, 0);
  std::uniform_int_distribution<size_t> first(0, n - 1);
  size_t pick = first(rng);
  chosen[pick] = 1;
  centroids.row(0) = vectors[pick].transpose();

  std::vector<double> d2(n);
  for (size_t i = 0; i < n; ++i) d2[i] = (vectors[i] - vectors[pick]).squaredNorm();
  for (int c = 1; c < num_clusters; ++c) {
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) total += chosen[i] ? 0.0 : d2[i];
    if (total > 0.0) {
      std::uniform_real_distribution<double> unit(0.0, total);
      const double u = unit(rng);
      double cumulative = 0.0;
      pick = n;
      for (size_t i = 0; i < n; ++i) {
        if (chosen[i] || d2[i] <= 0.0) continue;
        cumulative += d2[i];
        pick = i;
        if (u < cumulative) break;
      }
    } else {
      // Remaining points coincide with chosen centroids.
      pick = static_cast<size_t>(std::find(chosen.begin(), chosen.end(), 0) - chosen.begin());
    }
    chosen[pick] = 1;
    centroids.row(c) = vectors[pick].transpose();
    for (size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (vectors[i] - vectors[pick]).squaredNorm());
    }
  }
  return centroids;
}

}  // namespace

int Codebook::Assign(const Eigen::VectorXd& x) const {
  int best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int c = 0; c < size(); ++c) {
    const double d2 = (x - centroids.row(c).transpose()).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = c;
    }
  }
  return best;
}

void Codebook::Validate() const {
  if (size() < 1) Invalid("codebook has no centroids");
  if (!centroids.allFinite()) Invalid("codebook centroids are not finite");
}

Codebook TrainCodebook(std::span<const Eigen::VectorXd> vectors, int num_clusters,
                       int iterations, uint64_t seed) {
  if (num_clusters < 1) Invalid("codebook needs at least one cluster");
  if (iterations < 0) Invalid("iterations must be >= 0");
  if (static_cast<int>(vectors.size()) < num_clusters) {
    throw Error(ErrorCode::kTooFewVectors,
                std::to_string(vectors.size()) + " vectors for " +
                    std::to_string(num_clusters) + " clusters");
  }
  const Eigen::Index dim = vectors[0].size();
  for (const auto& v : vectors) {
    if (v.size() != dim) throw Error(ErrorCode::kDimensionMismatch, "vector sizes differ");
  }

  Rng rng = MakeRng(seed, {0xc0deb00c});
  Codebook book;
  book.centroids = SeedPlusPlus(vectors, num_clusters, rng);
  std::vector<int> labels(vectors.size(), 0);
  for (int iter = 0; iter <= iterations; ++iter) {
    for (size_t i = 0; i < vectors.size(); ++i) labels[i] = book.Assign(vectors[i]);
    book.sse_history.push_back(Sse(vectors, book.centroids, labels));
    if (iter == iterations) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(num_clusters, dim);
    std::vector<int> counts(num_clusters, 0);
    for (size_t i = 0; i < vectors.size(); ++i) {
      sums.row(labels[i]) += vectors[i].transpose();
      ++counts[labels[i]];
    }
    std::vector<char> taken(vectors.size(), 0);
    for (int c = 0; c < num_clusters; ++c) {
      if (counts[c] > 0) {
        book.centroids.row(c) = sums.row(c) / counts[c];
        continue;
      }
      size_t far = 0;
      double far_d2 = -1.0;
      for (size_t i = 0; i < vectors.size(); ++i) {
        if (taken[i]) continue;
        const double d2 = (vectors[i] - book.centroids.row(labels[i]).transpose()).squaredNorm();
        if (d2 > far_d2) {
          far_d2 = d2;
          far = i;
        }
      }
      taken[far] = 1;
      book.centroids.row(c) = vectors[far].transpose();
    }
  }
  return book;
}

std::vector<Eigen::VectorXd> ProjectFeatures(const ViewImage& view,
                                             const EmbeddingModel& model) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(view.features.size());
  for (const auto& f : view.features) {
    if (f.descriptor.size() != model.descriptor_dim()) {
      throw Error(ErrorCode::kDimensionMismatch, "descriptor does not fit the model");
    }
    out.push_back(model.projection() * f.descriptor);
  }
  return out;
}

AsmkSignature AsmkAggregate(std::span<const Eigen::VectorXd> vectors,
                            const Codebook& codebook) {
  AsmkSignature sig;
  sig.dim = codebook.dim();
  std::map<int, Eigen::VectorXd> residuals;
  for (const auto& z : vectors) {
    if (z.size() != codebook.dim()) {
      throw Error(ErrorCode::kCodebookMismatch, "feature does not fit the codebook");
    }
    const int cell = codebook.Assign(z);
    const Eigen::VectorXd r = z - codebook.centroids.row(cell).transpose();
    auto [it, inserted] = residuals.try_emplace(cell, r);
    if (!inserted) it->second += r;
  }
  const size_t words = (static_cast<size_t>(sig.dim) + 63) / 64;
  for (const auto& [cell, sum] : residuals) {
    if (sum.isZero(0.0)) {
      ++sig.dropped_cells;
      continue;
    }
    std::vector<uint64_t> bits(words, 0);
    for (int k = 0; k < sig.dim; ++k) {
      if (sum[k] < 0.0) bits[k / 64] |= uint64_t{1} << (k % 64);
    }
    sig.cells.emplace(cell, std::move(bits));
  }
  return sig;
}

AsmkSignature AsmkAggregate(const ViewImage& view, const EmbeddingModel& model,
                            const Codebook& codebook) {
  const auto vectors = ProjectFeatures(view, model);
  return AsmkAggregate(vectors, codebook);
}

double BinaryAgreement(const std::vector<uint64_t>& a, const std::vector<uint64_t>& b,
                       int dim) {
  int differing = 0;
  for (size_t w = 0; w < a.size(); ++w) differing += std::popcount(a[w] ^ b[w]);
  return static_cast<double>(dim - 2 * differing) / dim;
}

double AsmkScore(const AsmkSignature& a, const AsmkSignature& b, double alpha,
                 double sel_threshold) {
  if (a.dim != b.dim) {
    throw Error(ErrorCode::kCodebookMismatch, "signature dimensions differ");
  }
  if (sel_threshold < 0.0) Invalid("selectivity threshold must be >= 0");
  if (a.empty() || b.empty()) return 0.0;
  double total = 0.0;
  auto ia = a.cells.begin();
  auto ib = b.cells.begin();
  while (ia != a.cells.end() && ib != b.cells.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      const double u = BinaryAgreement(ia->second, ib->second, a.dim);
      if (u >= sel_threshold) total += (u < 0.0 ? -1.0 : 1.0) * std::pow(std::abs(u), alpha);
      ++ia;
      ++ib;
    }
  }
  return total / std::sqrt(static_cast<double>(a.cells.size()) *
                           static_cast<double>(b.cells.size()));
}

void SortRanking(RankedList* ranking) {
  std::sort(ranking->begin(), ranking->end(), [](const RankedEntry& l, const RankedEntry& r) {
    if (l.score != r.score) return l.score > r.score;
    return l.view_id < r.view_id;
  });
}

std::string_view BackendName(RetrievalBackend backend) {
  return backend == RetrievalBackend::kGlobalCosine ? "global_cosine" : "asmk";
}

RetrievalBackend ParseBackend(std::string_view name) {
  if (name == "global_cosine") return RetrievalBackend::kGlobalCosine;
  if (name == "asmk") return RetrievalBackend::kAsmk;
  Invalid("unknown retrieval backend '" + std::string(name) + "'");
  return RetrievalBackend::kGlobalCosine;
}

void AsmkParams::Validate() const {
  if (num_clusters < 1) Invalid("num_clusters must be >= 1");
  if (iterations < 0) Invalid("codebook iterations must be >= 0");
  if (!(alpha > 0.0)) Invalid("alpha must be > 0");
  if (sel_threshold < 0.0) Invalid("sel_threshold must be >= 0");
}

RetrievalIndex RetrievalIndex::Build(std::span<const ViewImage> database,
                                     const EmbeddingModel& model, RetrievalBackend backend,
                                     const AsmkParams& params) {
  if (backend == RetrievalBackend::kAsmk) {
    params.Validate();
    std::vector<Eigen::VectorXd> pool;
    for (const auto& view : database) {
      auto projected = ProjectFeatures(view, model);
      pool.insert(pool.end(), projected.begin(), projected.end());
    }
    const int clusters = std::min<int>(params.num_clusters, static_cast<int>(pool.size()));
    if (clusters < 1) {
      throw Error(ErrorCode::kTooFewVectors, "database has no local features");
    }
    return BuildWithCodebook(database, model,
                             TrainCodebook(pool, clusters, params.iterations, params.seed),
                             params);
  }
  if (database.empty()) Invalid("retrieval database is empty");
  RetrievalIndex index;
  index.backend_ = backend;
  index.model_ = model;
  index.params_ = params;
  for (const auto& view : database) {
    index.ids_.push_back(view.id);
    index.embeddings_.push_back(Aggregate(view, model));
  }
  return index;
}

RetrievalIndex RetrievalIndex::BuildWithCodebook(std::span<const ViewImage> database,
                                                 const EmbeddingModel& model,
                                                 Codebook codebook,
                                                 const AsmkParams& params) {
  if (database.empty()) Invalid("retrieval database is empty");
  params.Validate();
  codebook.Validate();
  if (codebook.dim() != model.embed_dim()) {
    throw Error(ErrorCode::kCodebookMismatch, "codebook does not fit the model");
  }
  RetrievalIndex index;
  index.backend_ = RetrievalBackend::kAsmk;
  index.model_ = model;
  index.params_ = params;
  index.codebook_ = std::move(codebook);
  for (const auto& view : database) {
    index.ids_.push_back(view.id);
    index.signatures_.push_back(AsmkAggregate(view, model, index.codebook_));
  }
  return index;
}

RankedList RetrievalIndex::Retrieve(const ViewImage& query, int k) const {
  if (k < 1) Invalid("k must be >= 1");
  RankedList ranking;
  ranking.reserve(ids_.size());
  if (backend_ == RetrievalBackend::kGlobalCosine) {
    const Eigen::VectorXd f = Aggregate(query, model_);
    for (size_t i = 0; i < ids_.size(); ++i) {
      ranking.push_back({ids_[i], f.dot(embeddings_[i])});
    }
  } else {
    const AsmkSignature sig = AsmkAggregate(query, model_, codebook_);
    for (size_t i = 0; i < ids_.size(); ++i) {
      ranking.push_back(
          {ids_[i], AsmkScore(sig, signatures_[i], params_.alpha, params_.sel_threshold)});
    }
  }
  SortRanking(&ranking);
  if (static_cast<int>(ranking.size()) > k) ranking.resize(k);
  return ranking;
}

}  // namespace synthloc
