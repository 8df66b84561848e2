#include <algorithm>
#include <cmath>
#include <string>

#include <gtest/gtest.h>

#include "synthloc/embed.h"
#include "synthloc/error.h"
#include "test_support.h"

namespace synthloc {
namespace {

// View with one feature per given descriptor, all at the image center.
ViewImage ViewOf(int id, const std::vector<Eigen::VectorXd>& descriptors,
                 int first_landmark = 0) {
  ViewImage view;
  view.id = id;
  for (size_t i = 0; i < descriptors.size(); ++i) {
    LocalFeature f;
    f.keypoint = Eigen::Vector2d(320, 240);
    f.descriptor = descriptors[i];
    f.landmark_id = first_landmark + static_cast<int>(i);
    view.features.push_back(f);
  }
  return view;
}

Eigen::VectorXd V2(double x, double y) { return Eigen::Vector2d(x, y); }

TEST(EmbeddingModel, RandomInitIsSeededAndScaled) {
  const EmbeddingModel a = EmbeddingModel::Random(16, 32, 3);
  const EmbeddingModel b = EmbeddingModel::Random(16, 32, 3);
  EXPECT_EQ(a.projection(), b.projection());
  const double var = a.projection().squaredNorm() / a.projection().size();
  EXPECT_NEAR(var, 1.0 / 32.0, 0.3 / 32.0);
  EXPECT_THROW(EmbeddingModel::Random(33, 32, 0), Error);
}

TEST(Aggregate, SingleFeatureIsNormalizedProjection) {
  Rng rng = MakeRng(1);
  const EmbeddingModel model = EmbeddingModel::Random(4, 8, 1);
  const Eigen::VectorXd d = RandomUnitVector(8, rng);
  const Eigen::VectorXd f = Aggregate(ViewOf(0, {d}), model);
  EXPECT_LT((f - (model.projection() * d).normalized()).norm(), 1e-12);
}

TEST(Aggregate, DuplicateFeaturesDoNotChangeResult) {
  Rng rng = MakeRng(2);
  const EmbeddingModel model = EmbeddingModel::Random(4, 8, 2);
  const Eigen::VectorXd a = RandomUnitVector(8, rng);
  const Eigen::VectorXd b = RandomUnitVector(8, rng);
  const Eigen::VectorXd one = Aggregate(ViewOf(0, {a}), model);
  const Eigen::VectorXd two = Aggregate(ViewOf(0, {a, a}), model);
  EXPECT_LT((one - two).norm(), 1e-12);
  const Eigen::VectorXd mixed = Aggregate(ViewOf(0, {a, b}), model);
  const Eigen::VectorXd mixed_dup = Aggregate(ViewOf(0, {a, b, a, b}), model);
  EXPECT_LT((mixed - mixed_dup).norm(), 1e-12);
}

TEST(Aggregate, MatchesNormWeightedMeanByHand) {
  // d = 3, e = 2 with W = first two rows of the identity: z_i = (x_i, y_i).
  const std::vector<Eigen::VectorXd> descriptors = {
      Eigen::Vector3d(3, 4, 1), Eigen::Vector3d(0, 1, 5), Eigen::Vector3d(-1, 0, 2),
      Eigen::Vector3d(6, 8, 0), Eigen::Vector3d(0, -2, 1)};
  // Norms 5, 1, 1, 10, 2; weighted sum = 5(3,4) + (0,1) + (-1,0) + 10(6,8) + 2(0,-2)
  //   = (15 + 0 - 1 + 60 + 0, 20 + 1 + 0 + 80 - 4) = (74, 97); total weight 19.
  const Eigen::Vector2d expected = Eigen::Vector2d(74.0 / 19.0, 97.0 / 19.0).normalized();
  const Eigen::VectorXd f =
      Aggregate(ViewOf(0, descriptors), EmbeddingModel::IdentityTruncation(2, 3));
  EXPECT_LT((f - expected).norm(), 1e-12);
}

TEST(Aggregate, ZeroSumIsDegenerate) {
  const auto result = AggregateDetailed(ViewOf(0, {V2(1, 0), V2(-1, 0)}),
                                        EmbeddingModel::IdentityTruncation(2, 2));
  EXPECT_TRUE(result.degenerate);
  EXPECT_EQ(result.embedding, Eigen::VectorXd(V2(1, 0)));
}

TEST(Aggregate, InvariantToFeatureOrderAndScale) {
  Rng rng = MakeRng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const EmbeddingModel model = EmbeddingModel::Random(4, 8, trial);
    ViewImage view = testing::RandomView(0, 12, 8, rng);
    const Eigen::VectorXd f = Aggregate(view, model);
    std::shuffle(view.features.begin(), view.features.end(), rng);
    EXPECT_LT((Aggregate(view, model) - f).norm(), 1e-9);
    const EmbeddingModel scaled(model.projection() * 3.7);
    EXPECT_LT((Aggregate(view, scaled) - f).norm(), 1e-9);
  }
}

TEST(LossContrastive, HandComputedExample) {
  const std::vector<ViewImage> views = {ViewOf(0, {V2(1, 0)}), ViewOf(1, {V2(0, 1)}),
                                        ViewOf(2, {V2(1, 0)})};
  const ViewStore store(views, nullptr);
  TrainingTuple t;
  t.query_id = 0;
  t.positive_id = 1;
  t.negative_ids = {2};
  EXPECT_NEAR(LossContrastive(t, store, EmbeddingModel::IdentityTruncation(2, 2), 0.7), 2.7,
              1e-12);
}

TEST(LossContrastive, ZeroWhenPositiveCoincidesAndNegativesFar) {
  const std::vector<ViewImage> views = {ViewOf(0, {V2(1, 0)}), ViewOf(1, {V2(2, 0)}),
                                        ViewOf(2, {V2(-1, 0)}), ViewOf(3, {V2(0, 1)})};
  const ViewStore store(views, nullptr);
  TrainingTuple t;
  t.query_id = 0;
  t.positive_id = 1;
  t.negative_ids = {2, 3};
  const EmbeddingModel model = EmbeddingModel::IdentityTruncation(2, 2);
  EXPECT_EQ(LossContrastive(t, store, model, 0.7), 0.0);
  const Eigen::MatrixXd g =
      Gradient(LossKind::kContrastive, std::span(&t, 1), store, model, 0.7);
  EXPECT_EQ(g.norm(), 0.0);
}

TEST(LossMulti, HandSummedPair) {
  // Original (0, 1 | 2) and a second tuple (3, 1 | 2) with weight 0.25:
  //   1.0 * |(1,0)-(0,1)|^2 + [0.7 - 0]^+ = 2.7
  //   0.25 * |(0,1)-(0,1)|^2 + [0.7 - |(0,1)-(1,0)|^2]^+ = 0
  // mean = 1.35.
  const std::vector<ViewImage> views = {ViewOf(0, {V2(1, 0)}), ViewOf(1, {V2(0, 1)}),
                                        ViewOf(2, {V2(1, 0)}), ViewOf(3, {V2(0, 1)})};
  const ViewStore store(views, nullptr);
  TrainingTuple a;
  a.query_id = 0;
  a.positive_id = 1;
  a.negative_ids = {2};
  TrainingTuple b = a;
  b.query_id = 3;
  b.weight = 0.25;
  const std::vector<TrainingTuple> tuples = {a, b};
  EXPECT_NEAR(LossMulti(tuples, store, EmbeddingModel::IdentityTruncation(2, 2), 0.7), 1.35,
              1e-12);
}

TEST(LossMulti, ZeroWeightAndFarNegativesGiveZero) {
  const std::vector<ViewImage> views = {ViewOf(0, {V2(1, 0)}), ViewOf(1, {V2(0, 1)}),
                                        ViewOf(2, {V2(-1, 0)})};
  const ViewStore store(views, nullptr);
  TrainingTuple t;
  t.query_id = 0;
  t.positive_id = 1;
  t.negative_ids = {2};
  t.weight = 0.0;
  EXPECT_EQ(LossMulti(std::span(&t, 1), store, EmbeddingModel::IdentityTruncation(2, 2), 0.7),
            0.0);
}

TEST(LossMulti, EmptySetThrows) {
  const std::vector<ViewImage> views = {ViewOf(0, {V2(1, 0)})};
  const ViewStore store(views, nullptr);
  try {
    LossMulti({}, store, EmbeddingModel::IdentityTruncation(2, 2), 0.7);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyTupleSet);
  }
}

TEST(LossAggregated, HandComputedFamily) {
  // Originals q=(1,0), p=(0,1), n=(1,0); variants of q and n under "v" are
  // (0,1) and (0,-1). phi(Q) = (1,1)/sqrt2, phi(P) = (0,1),
  // phi(N) = (1,-1)/sqrt2. |phi(Q)-phi(P)|^2 = 2 - sqrt2 and
  // |phi(Q)-phi(N)|^2 = 2, so the hinge is inactive at margin 0.7.
  std::vector<ViewImage> views = {ViewOf(0, {V2(1, 0)}), ViewOf(1, {V2(0, 1)}),
                                  ViewOf(2, {V2(1, 0)})};
  std::map<int, std::vector<ViewImage>> variants;
  for (const auto& [id, d] : std::vector<std::pair<int, Eigen::VectorXd>>{
           {0, V2(0, 1)}, {1, V2(0, 1)}, {2, V2(0, -1)}}) {
    ViewImage v = ViewOf(id, {d});
    v.condition = "v";
    variants[id].push_back(v);
  }
  const VariantStore vs({"v"}, variants);
  const ViewStore store(views, &vs);
  TrainingTuple original;
  original.query_id = 0;
  original.positive_id = 1;
  original.negative_ids = {2};
  TrainingTuple synthetic = original;
  synthetic.prompt = "v";
  synthetic.weight = 0.5;
  const std::vector<TrainingTuple> family = {original, synthetic};
  const EmbeddingModel model = EmbeddingModel::IdentityTruncation(2, 2);
  EXPECT_NEAR(LossAggregated(family, store, model, 0.7), 2.0 - std::sqrt(2.0), 1e-12);
  // A margin of 3 activates the hinge: 3 - 2 = 1 more.
  EXPECT_NEAR(LossAggregated(family, store, model, 3.0), 3.0 - std::sqrt(2.0), 1e-12);
}

TEST(LossAggregated, MismatchedPositiveThrows) {
  Rng rng = MakeRng(4);
  testing::LossInstance inst = testing::RandomLossInstance(LossKind::kAggregated, rng);
  inst.tuples[1].positive_id = 5;
  inst.tuples[1].negative_ids = {2};
  inst.tuples[0].negative_ids = {2};
  const ViewStore store(inst.originals, &inst.variants);
  try {
    LossAggregated(inst.tuples, store, inst.model, inst.margin);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMismatchedTupleFamily);
  }
}

TEST(LossAggregated, IdentityVariantsReduceToContrastive) {
  Rng rng = MakeRng(5);
  std::vector<ViewImage> views;
  for (int id = 0; id < 5; ++id) views.push_back(testing::RandomView(id, 4, 8, rng, true, 10 * id));
  std::map<int, std::vector<ViewImage>> variants;
  for (const auto& v : views) variants[v.id].push_back(ApplyVariant(v, IdentityShift("id", 8), 0));
  const VariantStore vs({"id"}, variants);
  const ViewStore store(views, &vs);
  TrainingTuple t;
  t.query_id = 0;
  t.positive_id = 1;
  t.negative_ids = {2, 3, 4};
  TrainingTuple s = t;
  s.prompt = "id";
  const std::vector<TrainingTuple> family = {t, s};
  const EmbeddingModel model = EmbeddingModel::Random(4, 8, 5);
  EXPECT_NEAR(LossAggregated(family, store, model, 1.5), LossContrastive(t, store, model, 1.5),
              1e-12);
}

TEST(Losses, ReductionsAreBitwise) {
  Rng rng = MakeRng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const testing::LossInstance inst = testing::RandomLossInstance(LossKind::kContrastive, rng);
    const ViewStore store(inst.originals, &inst.variants);
    const TrainingTuple& t = inst.tuples[0];
    const double contrastive = LossContrastive(t, store, inst.model, inst.margin);
    EXPECT_EQ(LossMulti(std::span(&t, 1), store, inst.model, inst.margin), contrastive);
    EXPECT_EQ(LossAggregated(std::span(&t, 1), store, inst.model, inst.margin), contrastive);
  }
}

TEST(Losses, NonNegative) {
  Rng rng = MakeRng(7);
  for (const LossKind kind : {LossKind::kContrastive, LossKind::kMulti, LossKind::kAggregated}) {
    for (int trial = 0; trial < 30; ++trial) {
      const testing::LossInstance inst = testing::RandomLossInstance(kind, rng);
      const ViewStore store(inst.originals, &inst.variants);
      EXPECT_GE(EvaluateLoss(kind, inst.tuples, store, inst.model, inst.margin, false).loss, 0.0);
    }
  }
}

std::string LossKindName(const ::testing::TestParamInfo<LossKind>& info) {
  switch (info.param) {
    case LossKind::kContrastive:
      return "Contrastive";
    case LossKind::kMulti:
      return "Multi";
    case LossKind::kAggregated:
      return "Aggregated";
  }
  return "Unknown";
}

class GradientCheck : public ::testing::TestWithParam<LossKind> {};

TEST_P(GradientCheck, MatchesFiniteDifferences) {
  Rng rng = MakeRng(8, {static_cast<uint64_t>(GetParam())});
  int checked = 0;
  while (checked < 100) {
    const testing::LossInstance inst = testing::RandomLossInstance(GetParam(), rng);
    if (testing::HingeClearance(GetParam(), inst) < 1e-3) continue;
    EXPECT_LT(testing::GradientRelativeError(GetParam(), inst), 1e-4);
    ++checked;
  }
}

TEST_P(GradientCheck, ScalingDirectionHasZeroDerivative) {
  Rng rng = MakeRng(9, {static_cast<uint64_t>(GetParam())});
  for (int trial = 0; trial < 20; ++trial) {
    const testing::LossInstance inst = testing::RandomLossInstance(GetParam(), rng);
    const ViewStore store(inst.originals, &inst.variants);
    const Eigen::MatrixXd g = Gradient(GetParam(), inst.tuples, store, inst.model, inst.margin);
    const double directional = (g.array() * inst.model.projection().array()).sum();
    EXPECT_NEAR(directional, 0.0, 1e-9 * std::max(1.0, g.norm()));
  }
}

INSTANTIATE_TEST_SUITE_P(Losses, GradientCheck,
                         ::testing::Values(LossKind::kContrastive, LossKind::kMulti,
                                           LossKind::kAggregated),
                         LossKindName);

TEST(TrainingTuple, ValidateRejectsOverlap) {
  TrainingTuple t;
  t.query_id = 1;
  t.positive_id = 2;
  t.negative_ids = {3, 1};
  EXPECT_THROW(t.Validate(), Error);
  t.negative_ids = {};
  EXPECT_THROW(t.Validate(), Error);
  t.negative_ids = {3};
  EXPECT_NO_THROW(t.Validate());
}

TEST(ViewStore, ResolvesOriginalsAndVariants) {
  Rng rng = MakeRng(10);
  const std::vector<ViewImage> views = {testing::RandomView(4, 3, 8, rng)};
  std::map<int, std::vector<ViewImage>> variants;
  variants[4].push_back(ApplyVariant(views[0], IdentityShift("x", 8), 0));
  const VariantStore vs({"x"}, variants);
  const ViewStore store(views, &vs);
  EXPECT_TRUE(store.Get(4, std::nullopt).IsOriginal());
  EXPECT_EQ(store.Get(4, std::string("x")).condition, "x");
  EXPECT_FALSE(store.Has(4, std::string("y")));
  EXPECT_FALSE(store.Has(5, std::nullopt));
  try {
    store.Get(4, std::string("y"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingVariant);
  }
}

}  // namespace
}  // namespace synthloc
