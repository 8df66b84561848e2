#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <gtest/gtest.h>

#include "synthloc/error.h"
#include "synthloc/geometry.h"
#include "synthloc/variants.h"
#include "oracles.h"
#include "test_support.h"

namespace synthloc {
namespace {

using testing::AreaPSide;
using testing::BruteMutualNn;
using testing::MinKeypointGap;
using testing::OverlappingPair;
using testing::Pairs;

TEST(MatchFeatures, SelfMatchIsIdentity) {
  Rng rng = MakeRng(1);
  const ViewImage view = testing::RandomView(0, 40, 16, rng);
  const Correspondences c = MatchFeatures(view, view, MatchParams{});
  ASSERT_EQ(c.size(), 40u);
  for (int i = 0; i < 40; ++i) EXPECT_EQ(c.pairs[i], std::make_pair(i, i));
}

TEST(MatchFeatures, RandomDisjointViewsBarelyMatch) {
  Rng rng = MakeRng(2);
  MatchParams params;
  params.ratio = 0.8;
  size_t matched = 0;
  size_t total = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const ViewImage a = testing::RandomView(0, 50, 32, rng, true, 0);
    const ViewImage b = testing::RandomView(1, 50, 32, rng, true, 100);
    matched += MatchFeatures(a, b, params).size();
    total += 50;
  }
  EXPECT_LE(static_cast<double>(matched) / total, 0.05);
}

TEST(MatchFeatures, EqualsBruteForceOnToyPairs) {
  Rng rng = MakeRng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto [a, b] = OverlappingPair(rng, 10, 6, 4);
    for (const double ratio : {0.7, 0.9, 1.0}) {
      MatchParams params;
      params.ratio = ratio;
      EXPECT_EQ(MatchFeatures(a, b, params).pairs, BruteMutualNn(a, b, ratio));
    }
  }
}

TEST(MatchFeatures, SymmetricUpToOrientation) {
  Rng rng = MakeRng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto [a, b] = OverlappingPair(rng, 30, 20, 8);
    const Pairs ab = MatchFeatures(a, b, MatchParams{}).pairs;
    Pairs ba = MatchFeatures(b, a, MatchParams{}).pairs;
    for (auto& p : ba) std::swap(p.first, p.second);
    std::sort(ba.begin(), ba.end());
    EXPECT_EQ(ab, ba);
  }
}

TEST(MatchFeatures, OneToOne) {
  Rng rng = MakeRng(5);
  auto [a, b] = OverlappingPair(rng, 60, 40, 8);
  std::set<int> left;
  std::set<int> right;
  for (const auto& [i, j] : MatchFeatures(a, b, MatchParams{}).pairs) {
    EXPECT_TRUE(left.insert(i).second);
    EXPECT_TRUE(right.insert(j).second);
  }
}

TEST(MatchFeatures, EmptyViewGivesEmptySet) {
  Rng rng = MakeRng(6);
  const ViewImage a = testing::RandomView(0, 5, 8, rng);
  EXPECT_EQ(MatchFeatures(a, ViewImage{}, MatchParams{}).size(), 0u);
}

TEST(VerifyIdentity, UnmovedKeypointsAllKept) {
  Rng rng = MakeRng(7);
  const ViewImage view = testing::RandomView(0, 30, 8, rng);
  DomainShift shift = IdentityShift("tint", 8);
  shift.descriptor_noise_sigma = 0.01;
  const ViewImage variant = ApplyVariant(view, shift, 0);
  const Correspondences c = MatchFeatures(view, variant, MatchParams{});
  EXPECT_EQ(VerifyIdentity(c, view, variant, 2.0).pairs, c.pairs);
}

TEST(VerifyIdentity, LargeShiftRejectsAll) {
  Rng rng = MakeRng(8);
  const ViewImage view = testing::RandomView(0, 30, 8, rng);
  ViewImage moved = view;
  for (auto& f : moved.features) f.keypoint += Eigen::Vector2d(20.0, 0.0);
  const Correspondences c = MatchFeatures(view, moved, MatchParams{});
  EXPECT_EQ(c.size(), 30u);
  EXPECT_EQ(VerifyIdentity(c, view, moved, 2.0).size(), 0u);
}

TEST(VerifyIdentity, MixedShiftsEqualThresholding) {
  Rng rng = MakeRng(9);
  const ViewImage view = testing::RandomView(0, 40, 8, rng);
  ViewImage moved = view;
  std::uniform_real_distribution<double> mag(0.0, 4.0);
  for (auto& f : moved.features) f.keypoint += Eigen::Vector2d(mag(rng), 0.0);
  const Correspondences c = MatchFeatures(view, moved, MatchParams{});
  Pairs expected;
  for (const auto& [i, j] : c.pairs) {
    if ((view.features[i].keypoint - moved.features[j].keypoint).norm() <= 2.0) {
      expected.emplace_back(i, j);
    }
  }
  const Correspondences kept = VerifyIdentity(c, view, moved, 2.0);
  EXPECT_EQ(kept.pairs, expected);
  for (const auto& p : kept.pairs) {
    EXPECT_NE(std::find(c.pairs.begin(), c.pairs.end(), p), c.pairs.end());
  }
}

TEST(ConsistencyScore, IdentityVariantScoresOne) {
  Rng rng = MakeRng(10);
  auto [q, p] = OverlappingPair(rng, 50, 30, 16);
  const ViewImage variant = ApplyVariant(q, IdentityShift("same", 16), 0);
  const ConsistencyScore s = ComputeConsistencyScore(q, p, variant, MatchParams{});
  ASSERT_GT(s.original, 0);
  EXPECT_EQ(s.value, 1.0);
  EXPECT_EQ(s.kept, s.original);
}

TEST(ConsistencyScore, RelabeledQueryScoresOne) {
  Rng rng = MakeRng(11);
  auto [q, p] = OverlappingPair(rng, 50, 30, 16);
  ViewImage relabeled = q;
  relabeled.condition = "relabeled";
  EXPECT_EQ(ComputeConsistencyScore(q, p, relabeled, MatchParams{}).value, 1.0);
}

TEST(ConsistencyScore, FullDropoutScoresZero) {
  Rng rng = MakeRng(12);
  auto [q, p] = OverlappingPair(rng, 50, 30, 16);
  DomainShift shift = IdentityShift("gone", 16);
  shift.dropout_rate = 1.0;
  shift.clutter_rate = 0.5;
  const ConsistencyScore s =
      ComputeConsistencyScore(q, p, ApplyVariant(q, shift, 0), MatchParams{});
  EXPECT_GT(s.original, 0);
  EXPECT_EQ(s.kept, 0);
  EXPECT_EQ(s.value, 0.0);
}

TEST(ConsistencyScore, NoReferenceMatchesIsFlagged) {
  Rng rng = MakeRng(13);
  const ViewImage q = testing::RandomView(0, 20, 8, rng, true, 0);
  const ViewImage p = testing::RandomView(1, 20, 8, rng, true, 500);
  ViewImage variant = q;
  variant.condition = "x";
  const ConsistencyScore s = ComputeConsistencyScore(q, p, variant, MatchParams{});
  EXPECT_TRUE(s.degenerate());
  EXPECT_EQ(s.value, 0.0);
}

TEST(ConsistencyScore, RequiresSyntheticVariant) {
  Rng rng = MakeRng(14);
  auto [q, p] = OverlappingPair(rng, 10, 5, 8);
  EXPECT_THROW(ComputeConsistencyScore(q, p, q, MatchParams{}), Error);
}

TEST(ConsistencyScore, EqualsIntersectionOracle) {
  Rng rng = MakeRng(15);
  const MatchParams params;
  DomainShift shift = IdentityShift("moderate", 16);
  shift.descriptor_bias = RandomUnitVector(16, rng);
  shift.bias_gain = 0.3;
  shift.descriptor_noise_sigma = 0.08;
  shift.dropout_rate = 0.2;
  shift.clutter_rate = 0.1;
  int checked = 0;
  for (uint64_t seed = 0; checked < 20; ++seed) {
    auto [q, p] = OverlappingPair(rng, 50, 35, 16);
    // The oracle identifies correspondences by p feature, which equals
    // keypoint agreement when p keypoints are far apart.
    if (MinKeypointGap(p) <= 2.0 * params.pixel_tol) continue;
    const ViewImage variant = ApplyVariant(q, shift, seed);
    const auto reference = AreaPSide(BruteMutualNn(q, p, params.ratio), q, q, p);
    const auto substituted = AreaPSide(BruteMutualNn(variant, p, params.ratio), variant, q, p);
    const std::set<int> ref_set(reference.begin(), reference.end());
    int kept = 0;
    for (const int j : substituted) kept += ref_set.count(j) ? 1 : 0;

    const ConsistencyScore s = ComputeConsistencyScore(q, p, variant, params);
    ASSERT_GT(reference.size(), 0u);
    EXPECT_EQ(s.original, static_cast<int>(reference.size()));
    EXPECT_EQ(s.kept, kept);
    EXPECT_EQ(s.value, static_cast<double>(kept) / reference.size());
    EXPECT_GE(s.value, 0.0);
    EXPECT_LE(s.value, 1.0);
    ++checked;
  }
}

TEST(ConsistencyScore, ClutterIsOutsideTheArea) {
  Rng rng = MakeRng(16);
  auto [q, p] = OverlappingPair(rng, 40, 25, 16);
  ViewImage cluttered = p;
  for (int i = 0; i < 10; ++i) cluttered.features.push_back(q.features[30 + i]);
  for (int i = 0; i < 10; ++i) cluttered.features[40 + i].landmark_id.reset();
  const ViewImage variant = ApplyVariant(q, IdentityShift("same", 16), 0);
  const ConsistencyScore base = ComputeConsistencyScore(q, p, variant, MatchParams{});
  const ConsistencyScore with = ComputeConsistencyScore(q, cluttered, variant, MatchParams{});
  EXPECT_EQ(base.original, with.original);
}

TEST(ValidatePair, RelativeAndAbsoluteModes) {
  ConsistencyScore one{1.0, 10, 10};
  ConsistencyScore zero{0.0, 0, 10};
  ConsistencyScore partial{0.25, 5, 20};
  EXPECT_TRUE(ValidatePair(one, 0.2));
  EXPECT_FALSE(ValidatePair(zero, 0.2));
  EXPECT_TRUE(ValidatePair(zero, 0.0));
  EXPECT_TRUE(ValidatePair(partial, 0.25));
  EXPECT_FALSE(ValidatePair(partial, 0.3));
  EXPECT_TRUE(ValidatePair(partial, 5, ThresholdMode::kAbsolute));
  EXPECT_FALSE(ValidatePair(partial, 6, ThresholdMode::kAbsolute));
}

TEST(ValidatePair, HigherThresholdGivesSubset) {
  for (int kept = 0; kept <= 20; ++kept) {
    const ConsistencyScore s{kept / 20.0, kept, 20};
    if (ValidatePair(s, 0.3)) {
      EXPECT_TRUE(ValidatePair(s, 0.2));
    }
  }
}

TEST(SelfConsistency, Extremes) {
  Rng rng = MakeRng(17);
  ViewImage view = testing::RandomView(0, 40, 16, rng);
  view.features.push_back(testing::RandomView(1, 1, 16, rng, false).features[0]);
  EXPECT_EQ(SelfConsistency(view, ApplyVariant(view, IdentityShift("same", 16), 0),
                            MatchParams{})
                .value,
            1.0);
  DomainShift gone = IdentityShift("gone", 16);
  gone.dropout_rate = 1.0;
  EXPECT_EQ(SelfConsistency(view, ApplyVariant(view, gone, 0), MatchParams{}).value, 0.0);
}

TEST(SelfConsistency, DropoutFollowsBinomial) {
  Rng rng = MakeRng(18);
  const ViewImage view = testing::RandomView(0, 100, 32, rng);
  DomainShift shift = IdentityShift("thin", 32);
  shift.dropout_rate = 0.3;
  int inside = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    const double s = SelfConsistency(view, ApplyVariant(view, shift, seed), MatchParams{}).value;
    if (s >= 0.58 && s <= 0.81) ++inside;
  }
  EXPECT_GE(inside, 95);
}

}  // namespace
}  // namespace synthloc
