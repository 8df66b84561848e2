#include <string>

#include <gtest/gtest.h>

#include "synthloc/config.h"
#include "synthloc/csv.h"
#include "synthloc/error.h"
#include "synthloc/world_io.h"
#include "test_support.h"

namespace synthloc {
namespace {

using testing::ReadFile;
using testing::Snapshot;
using testing::TempDir;

TEST(WorldIo, RewriteIsByteIdentical) {
  const World world = GenerateWorld(testing::SmallWorldConfig(), 3);
  const auto dir = TempDir("world_a");
  WriteWorld(world, dir / "a");
  const World back = ReadWorld(dir / "a");
  WriteWorld(back, dir / "b");
  EXPECT_EQ(Snapshot(dir / "a"), Snapshot(dir / "b"));

  ASSERT_EQ(back.map_views.size(), world.map_views.size());
  ASSERT_EQ(back.query_views.size(), world.query_views.size());
  EXPECT_EQ(back.matching_pairs, world.matching_pairs);
  EXPECT_EQ(back.seed, world.seed);
  for (size_t i = 0; i < world.map_views.size(); ++i) {
    const ViewImage& a = world.map_views[i];
    const ViewImage& b = back.map_views[i];
    EXPECT_EQ(a.id, b.id);
    EXPECT_EQ(a.condition, b.condition);
    EXPECT_EQ(a.LandmarkIds(), b.LandmarkIds());
    EXPECT_LT((a.pose.position - b.pose.position).norm(), 1e-6);
    ASSERT_EQ(a.features.size(), b.features.size());
    for (size_t f = 0; f < a.features.size(); ++f) {
      EXPECT_LT((a.features[f].descriptor - b.features[f].descriptor).norm(), 1e-7);
    }
  }
  for (size_t i = 0; i < world.query_views.size(); ++i) {
    EXPECT_EQ(world.query_views[i].condition, back.query_views[i].condition);
  }
}

TEST(WorldIo, MissingDirectoryIsDataError) {
  try {
    ReadWorld(TempDir("world_missing") / "nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kData);
  }
}

TEST(WorldIo, PromptDirName) {
  EXPECT_EQ(PromptDirName("at night with rain"), "at_night_with_rain");
  EXPECT_EQ(PromptDirName("plain"), "plain");
}

TEST(PromptsIo, RoundTrip) {
  const PromptSet prompts = DefaultPromptSet(16, 4);
  const auto dir = TempDir("prompts");
  WritePrompts(prompts, dir / "a.csv");
  const PromptSet back = ReadPrompts(dir / "a.csv");
  EXPECT_EQ(back.Names(), prompts.Names());
  WritePrompts(back, dir / "b.csv");
  EXPECT_EQ(ReadFile(dir / "a.csv"), ReadFile(dir / "b.csv"));
  for (size_t i = 0; i < prompts.size(); ++i) {
    EXPECT_EQ(back.shifts[i].dropout_rate, prompts.shifts[i].dropout_rate);
    EXPECT_LT((back.shifts[i].descriptor_bias - prompts.shifts[i].descriptor_bias).norm(), 1e-12);
  }
}

TEST(VariantsIo, RoundTrip) {
  const World world = GenerateWorld(testing::SmallWorldConfig(), 4);
  const PromptSet all = DefaultPromptSet(world.DescriptorDim(), 0);
  const std::vector<std::string> names = {"at night", "with snow"};
  PromptSet prompts;
  for (const auto& name : names) prompts.shifts.push_back(all.Find(name));
  const VariantStore variants = GenerateAllVariants(world, prompts, 9);
  const auto dir = TempDir("variants");
  WriteVariants(variants, dir / "a");
  const VariantStore back = ReadVariants(dir / "a", world, names);
  EXPECT_EQ(back.NumViews(), variants.NumViews());
  for (const auto& view : world.map_views) {
    for (const auto& name : names) {
      const ViewImage* a = variants.Find(view.id, name);
      const ViewImage* b = back.Find(view.id, name);
      ASSERT_NE(a, nullptr);
      ASSERT_NE(b, nullptr);
      EXPECT_EQ(a->condition, b->condition);
      EXPECT_EQ(a->LandmarkIds(), b->LandmarkIds());
      EXPECT_EQ(a->features.size(), b->features.size());
    }
  }
  WriteVariants(back, dir / "b");
  EXPECT_EQ(Snapshot(dir / "a"), Snapshot(dir / "b"));
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "features_variants" / "at_night" /
                                      (std::to_string(world.map_views[0].id) + ".csv")));
}

TEST(ConsistencyIo, RoundTrip) {
  ConsistencyTable table;
  table.Set(1, 2, "at night", ConsistencyScore{0.75, 3, 4});
  table.Set(2, 1, "at night", ConsistencyScore{0.0, 0, 0});
  table.Set(1, 2, "with snow", ConsistencyScore{1.0 / 3.0, 1, 3});
  const auto dir = TempDir("consistency");
  WriteConsistency(table, 0.3, ThresholdMode::kRelative, dir / "c.csv");
  const ConsistencyTable back = ReadConsistency(dir / "c.csv");
  ASSERT_EQ(back.size(), 3u);
  const ConsistencyScore* s = back.Find(1, 2, "with snow");
  ASSERT_NE(s, nullptr);
  EXPECT_EQ(s->value, 1.0 / 3.0);
  EXPECT_EQ(s->kept, 1);
  EXPECT_EQ(s->original, 3);
  EXPECT_TRUE(back.Find(2, 1, "at night")->degenerate());

  const CsvTable csv = ReadCsv(dir / "c.csv");
  EXPECT_EQ(csv.header, (std::vector<std::string>{"query_id", "positive_id", "prompt", "s",
                                                  "kept", "original", "valid"}));
  const int valid = csv.Column("valid");
  const int prompt = csv.Column("prompt");
  for (size_t r = 0; r < csv.rows.size(); ++r) {
    const double value = csv.Double(r, csv.Column("s"));
    EXPECT_EQ(csv.Int(r, valid), value >= 0.3 ? 1 : 0) << csv.rows[r][prompt];
  }
}

TEST(ModelIo, RoundTripIsExact) {
  const EmbeddingModel model = EmbeddingModel::Random(5, 7, 3);
  const auto dir = TempDir("model");
  WriteModel(model, dir / "m.csv");
  const EmbeddingModel back = ReadModel(dir / "m.csv");
  EXPECT_EQ(back.projection(), model.projection());
}

TEST(TraceIo, Layout) {
  std::vector<SeedTrace> traces(2);
  traces[0].seed = 3;
  traces[0].episodes = {{0, 1.5, 0.0}, {1, 1.25, 0.5}};
  traces[1].seed = 4;
  traces[1].episodes = {{0, 2.0, 0.25}};
  const auto dir = TempDir("trace");
  WriteTrace(traces, dir / "trace.csv");
  const CsvTable csv = ReadCsv(dir / "trace.csv");
  EXPECT_EQ(csv.header,
            (std::vector<std::string>{"seed", "episode", "mean_loss", "synth_fraction"}));
  ASSERT_EQ(csv.rows.size(), 3u);
  EXPECT_EQ(csv.Int(2, 0), 4);
  EXPECT_EQ(csv.Double(1, 3), 0.5);
}

TEST(Csv, Errors) {
  const auto dir = TempDir("csv");
  EXPECT_THROW(ReadCsv(dir / "missing.csv"), Error);
  {
    std::ofstream out(dir / "empty.csv");
  }
  EXPECT_THROW(ReadCsv(dir / "empty.csv"), Error);
  {
    std::ofstream out(dir / "ragged.csv");
    out << "a,b\n1,2\n3\n";
  }
  EXPECT_THROW(ReadCsv(dir / "ragged.csv"), Error);
  {
    std::ofstream out(dir / "bad.csv");
    out << "a,b\n1,x\n";
  }
  const CsvTable table = ReadCsv(dir / "bad.csv");
  EXPECT_EQ(table.Int(0, 0), 1);
  try {
    table.Double(0, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kData);
    EXPECT_NE(std::string(e.what()).find("bad.csv"), std::string::npos);
  }
  EXPECT_THROW(table.Column("c"), Error);
}

TEST(Csv, Formatting) {
  EXPECT_EQ(FormatFixed(0.5, 6), "0.500000");
  EXPECT_EQ(FormatSig(1.0 / 3.0, 9), "0.333333333");
}

TEST(Config, ReferenceParsesToDefaults) {
  const ExperimentConfig parsed = ParseConfig(ReferenceConfig());
  EXPECT_EQ(DumpConfig(parsed), DumpConfig(ExperimentConfig{}));
  EXPECT_NO_THROW(parsed.Validate());
}

TEST(Config, DumpRoundTrips) {
  ExperimentConfig config;
  config.seed = 9;
  config.train.learning_rate = 0.05;
  config.train.mode = TrainMode::kMultiK;
  config.world.num_landmarks = 321;
  config.prompt_names = {"at night", "with snow"};
  const ExperimentConfig back = ParseConfig(DumpConfig(config));
  EXPECT_EQ(DumpConfig(back), DumpConfig(config));
  EXPECT_EQ(back.train.learning_rate, 0.05);
  EXPECT_EQ(back.world.num_landmarks, 321);
}

TEST(Config, PartialOverrideKeepsDefaults) {
  const ExperimentConfig config = ParseConfig(R"({
    // comment
    "train": {"episodes": 3}
  })");
  EXPECT_EQ(config.train.episodes, 3);
  EXPECT_EQ(config.world.num_landmarks, 500);
}

TEST(Config, UnknownKeyNamesPath) {
  try {
    ParseConfig(R"({"train": {"lrr": 0.1}})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
    EXPECT_NE(std::string(e.what()).find("train.lrr"), std::string::npos);
  }
}

TEST(Config, WrongTypeNamesPath) {
  try {
    ParseConfig(R"({"train": {"lr": "fast"}})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
    EXPECT_NE(std::string(e.what()).find("train.lr"), std::string::npos);
  }
}

TEST(Config, InvalidValuesRejected) {
  ExperimentConfig config;
  config.train.c_tau = -0.1;
  EXPECT_THROW(config.Validate(), Error);
  config = ExperimentConfig{};
  config.prompt_names = {"on mars"};
  EXPECT_THROW(config.Validate(), Error);
  config = ExperimentConfig{};
  config.train_seeds.clear();
  EXPECT_THROW(config.Validate(), Error);
}

TEST(Config, DefaultGridOrder) {
  const auto grid = DefaultAblationGrid();
  ASSERT_GE(grid.size(), 3u);
  EXPECT_EQ(grid.front().mode, TrainMode::kBaseline);
}

}  // namespace
}  // namespace synthloc
