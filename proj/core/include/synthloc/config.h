#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "synthloc/geometry.h"
#include "synthloc/index.h"
#include "synthloc/localize.h"
#include "synthloc/training.h"
#include "synthloc/worldgen.h"

namespace synthloc {

// One row of the ablation grid: overrides applied to the train section.
struct MethodSpec {
  std::string name;
  TrainMode mode = TrainMode::kBaseline;
  double c_tau = 0.0;
  SamplingMode sampling = SamplingMode::kUniform;
  int num_variants = 2;

  bool operator==(const MethodSpec&) const = default;
};

std::vector<MethodSpec> DefaultAblationGrid();

struct EvalConfig {
  std::vector<int> ks = {1, 5, 10};
  std::vector<int> recall_ks = {1, 5, 10};
  double recall_radius = kPlaceRecognitionRadius;
  AccuracyThresholds thresholds;
  RansacParams ransac;
  bool run_sfm = true;
};

struct ExperimentConfig {
  uint64_t seed = 0;  // world generation
  WorldConfig world;
  // Subset of the eleven prompts used for training variants; empty = all.
  std::vector<std::string> prompt_names;
  uint64_t variant_seed = 0;
  MatchParams match;
  TrainConfig train;
  std::vector<uint64_t> train_seeds = {0, 1, 2, 3, 4};
  RetrievalBackend backend = RetrievalBackend::kGlobalCosine;
  AsmkParams asmk;
  EvalConfig eval;
  std::vector<MethodSpec> methods = DefaultAblationGrid();
  std::string output_dir = "out";

  // Throws kConfig naming the offending setting.
  void Validate() const;
  // The prompt set shared by variant generation and shifted queries.
  PromptSet Prompts() const;
  // `train` with a grid row applied.
  TrainConfig TrainFor(const MethodSpec& method, uint64_t seed) const;
};

// JSON with // comments allowed. Unknown keys and wrongly typed values throw
// kConfig with the dotted key path, e.g. "train.lr".
ExperimentConfig ParseConfig(std::string_view text);
ExperimentConfig LoadConfig(const std::filesystem::path& path);

// Every setting with its default and a one-line description; parses back to
// the default configuration.
std::string ReferenceConfig();
// Same layout for an arbitrary configuration, without descriptions.
std::string DumpConfig(const ExperimentConfig& config);

}  // namespace synthloc
