#include "synthloc/random.h"

namespace synthloc {

uint64_t MixSeed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t HashString(std::string_view text) {
  uint64_t hash = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

Rng MakeRng(uint64_t seed, std::initializer_list<uint64_t> streams) {
  uint64_t state = MixSeed(seed, 0);
  for (const uint64_t stream : streams) {
    state = MixSeed(state, stream);
  }
  return Rng(state);
}

Eigen::VectorXd GaussianVector(int dim, double sigma, Rng& rng) {
  Eigen::VectorXd v(dim);
  if (sigma <= 0.0) {
    v.setZero();
    return v;
  }
  std::normal_distribution<double> normal(0.0, sigma);
  for (int i = 0; i < dim; ++i) v[i] = normal(rng);
  return v;
}

Eigen::VectorXd RandomUnitVector(int dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(dim);
  do {
    for (int i = 0; i < dim; ++i) v[i] = normal(rng);
  } while (v.norm() < 1e-12);
  return v.normalized();
}

}  // namespace synthloc
