// synthloc: world generation, variant synthesis, training, evaluation and
// the ablation grid from the command line.
//
// Exit codes: 0 success, 1 internal failure, 2 configuration error,
// 3 data error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "synthloc/config.h"
#include "synthloc/error.h"
#include "synthloc/experiment.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

synthloc::ExperimentConfig Load(const std::string& path) {
  if (path.empty()) return synthloc::ExperimentConfig{};
  return synthloc::LoadConfig(path);
}

fs::path OutDir(const std::string& flag, const synthloc::ExperimentConfig& config) {
  return flag.empty() ? fs::path(config.output_dir) : fs::path(flag);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic-data training and evaluation for retrieval-based localization"};
  app.require_subcommand(0, 1);

  std::string reference_path;
  app.add_option("--write-reference", reference_path,
                 "Write every setting with its default and description to this file");

  std::string config_path;
  std::optional<uint64_t> seed;
  std::string out;
  std::string world_dir;
  std::string variants_dir;
  std::string model_path;

  auto add_common = [&](CLI::App* cmd, const char* seed_help) {
    cmd->add_option("--config", config_path, "Experiment configuration (JSON)");
    cmd->add_option("--seed", seed, seed_help);
    cmd->add_option("--out", out, "Output directory (default: output_dir)");
  };

  CLI::App* worldgen = app.add_subcommand("worldgen", "Generate a synthetic world");
  add_common(worldgen, "World seed (overrides seed)");

  CLI::App* variants = app.add_subcommand("variants", "Generate variants and consistency scores");
  add_common(variants, "Variant seed (overrides prompts.variant_seed)");
  variants->add_option("--world", world_dir, "World directory")->required();

  CLI::App* train = app.add_subcommand("train", "Train embedding models");
  add_common(train, "Train a single model with this seed (overrides train.seeds)");
  train->add_option("--world", world_dir, "World directory")->required();
  train->add_option("--variants", variants_dir, "Variants directory (unused in baseline mode)");

  CLI::App* evaluate = app.add_subcommand("evaluate", "Retrieve, localize and summarize");
  add_common(evaluate, "RANSAC base seed (overrides evaluation.ransac.seed)");
  evaluate->add_option("--world", world_dir, "World directory")->required();
  evaluate->add_option("--model", model_path, "Model file")->required();

  CLI::App* ablate = app.add_subcommand("ablate", "Run the ablation grid end to end");
  add_common(ablate, "World seed (overrides seed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& error) {
    const int code = app.exit(error);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (!reference_path.empty()) {
      std::ofstream file(reference_path, std::ios::binary | std::ios::trunc);
      file << synthloc::ReferenceConfig();
      if (!file) throw synthloc::Error(synthloc::ErrorCode::kData, "cannot write " + reference_path);
    }
    if (app.get_subcommands().empty()) {
      if (reference_path.empty()) std::cout << app.help();
      return kExitOk;
    }

    synthloc::ExperimentConfig config = Load(config_path);
    if (worldgen->parsed()) {
      if (seed) config.seed = *seed;
      synthloc::RunWorldgen(config, OutDir(out, config));
    } else if (variants->parsed()) {
      if (seed) config.variant_seed = *seed;
      synthloc::RunVariants(config, world_dir, OutDir(out, config));
    } else if (train->parsed()) {
      if (seed) config.train_seeds = {*seed};
      if (config.train.mode != synthloc::TrainMode::kBaseline && variants_dir.empty()) {
        throw synthloc::Error(synthloc::ErrorCode::kConfig,
                              "train.mode: synthetic modes need --variants");
      }
      synthloc::RunTrain(config, world_dir, variants_dir, OutDir(out, config));
    } else if (evaluate->parsed()) {
      if (seed) config.eval.ransac.seed = *seed;
      synthloc::RunEvaluate(config, world_dir, model_path, OutDir(out, config));
    } else if (ablate->parsed()) {
      if (seed) config.seed = *seed;
      const auto rows = synthloc::RunAblate(config, OutDir(out, config));
      std::cout << "wrote " << rows.size() << " report rows to "
                << (OutDir(out, config) / "report.csv").string() << "\n";
    }
  } catch (const synthloc::Error& error) {
    std::cerr << "synthloc: " << error.what() << "\n";
    switch (error.code()) {
      case synthloc::ErrorCode::kConfig:
        return kExitConfig;
      case synthloc::ErrorCode::kData:
      case synthloc::ErrorCode::kDegenerateWorld:
      case synthloc::ErrorCode::kNoVisibleLandmarks:
      case synthloc::ErrorCode::kDimensionMismatch:
      case synthloc::ErrorCode::kMissingVariant:
        return kExitData;
      default:
        return kExitInternal;
    }
  } catch (const std::exception& error) {
    std::cerr << "synthloc: " << error.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}
