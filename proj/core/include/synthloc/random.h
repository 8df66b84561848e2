#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

#include <Eigen/Core>

namespace synthloc {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent per-item streams so that
// results do not depend on evaluation order.
uint64_t MixSeed(uint64_t seed, uint64_t stream);

// FNV-1a, stable across platforms (unlike std::hash).
uint64_t HashString(std::string_view text);

Rng MakeRng(uint64_t seed, std::initializer_list<uint64_t> streams = {});

Eigen::VectorXd GaussianVector(int dim, double sigma, Rng& rng);
Eigen::VectorXd RandomUnitVector(int dim, Rng& rng);

}  // namespace synthloc
