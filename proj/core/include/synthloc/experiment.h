#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "synthloc/config.h"

namespace synthloc {

// Writes the world directory (see world_io.h).
void RunWorldgen(const ExperimentConfig& config, const std::filesystem::path& out);

// Writes prompts.csv, features_variants/ and consistency.csv (validity at
// the configured c_tau).
void RunVariants(const ExperimentConfig& config, const std::filesystem::path& world_dir,
                 const std::filesystem::path& out);

// One model per train seed (model_seed<k>.csv), their average
// (model_avg.csv) and trace.csv. Baseline mode never reads `variants_dir`.
void RunTrain(const ExperimentConfig& config, const std::filesystem::path& world_dir,
              const std::filesystem::path& variants_dir, const std::filesystem::path& out);

// Rates keyed by (query subset, protocol, k); subsets are "all", "clean"
// and "shifted", protocols "ewb" and "sfm". One percentage per accuracy level.
using RateTable = std::map<std::tuple<std::string, std::string, int>, std::vector<double>>;

struct EvaluationResult {
  RateTable rates;
  // Recall keyed by (subset, k).
  std::map<std::pair<std::string, int>, double> recall;
};

// Writes rankings.csv, localization.csv, summary{,_clean,_shifted}.csv and
// recall.csv.
EvaluationResult RunEvaluate(const ExperimentConfig& config,
                             const std::filesystem::path& world_dir,
                             const std::filesystem::path& model_path,
                             const std::filesystem::path& out);

// Recomputes the summary rates from a localization.csv.
RateTable SummarizeLocalization(const std::filesystem::path& localization_csv,
                                const std::filesystem::path& world_dir,
                                const AccuracyThresholds& thresholds);

struct AblationRow {
  std::string condition;  // query subset
  std::string method;
  std::string protocol;
  int k = 0;
  std::string metric;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  double delta = 0.0;  // median minus the first method's median
};

// Runs the whole grid through the on-disk pipeline under `out` and writes
// report.csv and report.txt.
std::vector<AblationRow> RunAblate(const ExperimentConfig& config,
                                   const std::filesystem::path& out);

// Rebuilds the report from the per-seed evaluation outputs under `out`.
std::vector<AblationRow> BuildAblationReport(const ExperimentConfig& config,
                                             const std::filesystem::path& out);

void WriteAblationReport(const std::vector<AblationRow>& rows,
                         const std::filesystem::path& out);

}  // namespace synthloc
