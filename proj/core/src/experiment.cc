#include "synthloc/experiment.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "synthloc/csv.h"
#include "synthloc/error.h"
#include "synthloc/random.h"
#include "synthloc/world_io.h"

namespace synthloc {
namespace {

namespace fs = std::filesystem;

const std::vector<std::string> kSubsets = {"all", "clean", "shifted"};

std::string SubsetFileSuffix(const std::string& subset) {
  return subset == "all" ? "" : "_" + subset;
}

bool InSubset(const std::string& subset, bool clean) {
  return subset == "all" || (subset == "clean") == clean;
}

std::vector<std::string> SummaryHeader(const AccuracyThresholds& thresholds) {
  std::vector<std::string> header = {"protocol", "k"};
  for (const auto& level : thresholds.levels) header.push_back("pct@" + level.name);
  return header;
}

void WriteSummaries(const RateTable& rates, const AccuracyThresholds& thresholds,
                    const fs::path& out) {
  for (const auto& subset : kSubsets) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [key, values] : rates) {
      const auto& [s, protocol, k] = key;
      if (s != subset) continue;
      std::vector<std::string> row = {protocol, std::to_string(k)};
      for (const double v : values) row.push_back(FormatFixed(v, 2));
      rows.push_back(std::move(row));
    }
    WriteCsv(out / ("summary" + SubsetFileSuffix(subset) + ".csv"), SummaryHeader(thresholds),
             rows);
  }
}

std::string ModelFileName(uint64_t seed) {
  return "model_seed" + std::to_string(seed) + ".csv";
}

double Median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  if (n == 0) return 0.0;
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

void RunWorldgen(const ExperimentConfig& config, const fs::path& out) {
  config.Validate();
  WriteWorld(GenerateWorld(config.world, config.seed), out);
}

void RunVariants(const ExperimentConfig& config, const fs::path& world_dir,
                 const fs::path& out) {
  config.Validate();
  const World world = ReadWorld(world_dir);
  if (world.DescriptorDim() != config.world.descriptor_dim) {
    throw Error(ErrorCode::kData, world_dir.string() +
                                      ": descriptor dimension differs from world.descriptor_dim");
  }
  const PromptSet prompts = config.Prompts();
  const VariantStore variants = GenerateAllVariants(world, prompts, config.variant_seed);
  fs::create_directories(out);
  WritePrompts(prompts, out / "prompts.csv");
  WriteVariants(variants, out);
  const ConsistencyTable table = ComputeConsistencyTable(world, variants, config.match);
  WriteConsistency(table, config.train.c_tau, config.train.threshold_mode,
                   out / "consistency.csv");
}

void RunTrain(const ExperimentConfig& config, const fs::path& world_dir,
              const fs::path& variants_dir, const fs::path& out) {
  config.Validate();
  const World world = ReadWorld(world_dir);
  VariantStore variants;
  ConsistencyTable scores;
  const bool synthetic = config.train.mode != TrainMode::kBaseline;
  if (synthetic) {
    const PromptSet prompts = ReadPrompts(variants_dir / "prompts.csv");
    variants = ReadVariants(variants_dir, world, prompts.Names());
    scores = ReadConsistency(variants_dir / "consistency.csv");
  }

  fs::create_directories(out);
  std::vector<EmbeddingModel> models;
  std::vector<SeedTrace> traces;
  for (const uint64_t seed : config.train_seeds) {
    TrainConfig train = config.train;
    train.seed = seed;
    TrainResult result = Train(world, synthetic ? &variants : nullptr,
                               synthetic ? &scores : nullptr, train);
    WriteModel(result.model, out / ModelFileName(seed));
    traces.push_back({seed, std::move(result.trace)});
    models.push_back(std::move(result.model));
  }
  WriteModel(AverageModels(models), out / "model_avg.csv");
  WriteTrace(traces, out / "trace.csv");
}

EvaluationResult RunEvaluate(const ExperimentConfig& config, const fs::path& world_dir,
                             const fs::path& model_path, const fs::path& out) {
  config.Validate();
  const World world = ReadWorld(world_dir);
  const EmbeddingModel model = ReadModel(model_path);
  if (model.descriptor_dim() != world.DescriptorDim()) {
    throw Error(ErrorCode::kData, model_path.string() + " does not fit the world's descriptors");
  }
  const RetrievalIndex index =
      RetrievalIndex::Build(world.map_views, model, config.backend, config.asmk);

  int depth = 1;
  for (const int k : config.eval.ks) depth = std::max(depth, k);
  for (const int k : config.eval.recall_ks) depth = std::max(depth, k);

  std::map<int, CameraPose> poses;
  std::map<int, Eigen::Vector3d> positions;
  for (const auto& view : world.map_views) {
    poses[view.id] = view.pose;
    positions[view.id] = view.pose.position;
  }

  std::vector<std::vector<std::string>> ranking_rows;
  std::vector<std::vector<std::string>> localization_rows;
  std::map<std::tuple<std::string, std::string, int>, std::vector<std::optional<PoseError>>>
      errors;
  std::map<std::string, std::map<int, RankedList>> rankings_by_subset;

  for (const auto& query : world.query_views) {
    const bool clean = query.IsOriginal();
    positions[query.id] = query.pose.position;
    const RankedList ranked = index.Retrieve(query, depth);
    for (size_t r = 0; r < ranked.size(); ++r) {
      ranking_rows.push_back({std::to_string(query.id), std::to_string(r + 1),
                              std::to_string(ranked[r].view_id),
                              FormatFixed(ranked[r].score, 6)});
    }
    for (const auto& subset : kSubsets) {
      if (InSubset(subset, clean)) rankings_by_subset[subset][query.id] = ranked;
    }

    auto record = [&](const std::string& protocol, int k, std::optional<PoseError> error,
                      const std::string& status) {
      localization_rows.push_back(
          {std::to_string(query.id), protocol, std::to_string(k),
           error ? FormatFixed(error->translation, 6) : "nan",
           error ? FormatFixed(error->rotation_deg, 6) : "nan", status});
      for (const auto& subset : kSubsets) {
        if (InSubset(subset, clean)) errors[{subset, protocol, k}].push_back(error);
      }
    };

    for (const int k : config.eval.ks) {
      record("ewb", k, ComputePoseError(EwbPose(ranked, poses, k), query.pose), "ok");
    }
    if (config.eval.run_sfm) {
      for (const int k : config.eval.ks) {
        RansacParams ransac = config.eval.ransac;
        ransac.seed = MixSeed(config.eval.ransac.seed, static_cast<uint64_t>(query.id));
        try {
          const PnpResult result = SfmLocalize(query, ranked, world.map_views,
                                               world.landmarks, k, config.match, ransac);
          record("sfm", k, ComputePoseError(result.pose, query.pose), "ok");
        } catch (const Error& error) {
          if (error.code() != ErrorCode::kNoConsensus &&
              error.code() != ErrorCode::kInsufficientCorrespondences) {
            throw;
          }
          record("sfm", k, std::nullopt, std::string(ErrorCodeName(error.code())));
        }
      }
    }
  }

  fs::create_directories(out);
  WriteCsv(out / "rankings.csv", {"query_id", "rank", "view_id", "score"}, ranking_rows);
  WriteCsv(out / "localization.csv",
           {"query_id", "protocol", "k", "tx_err_m", "rot_err_deg", "status"},
           localization_rows);

  EvaluationResult result;
  for (const auto& [key, list] : errors) {
    result.rates[key] = LocalizationRate(list, config.eval.thresholds);
  }
  WriteSummaries(result.rates, config.eval.thresholds, out);

  std::vector<std::vector<std::string>> recall_rows;
  for (const auto& subset : kSubsets) {
    const auto it = rankings_by_subset.find(subset);
    if (it == rankings_by_subset.end()) continue;
    const auto recalls =
        RecallAtK(it->second, positions, config.eval.recall_radius, config.eval.recall_ks);
    for (size_t i = 0; i < recalls.size(); ++i) {
      result.recall[{subset, config.eval.recall_ks[i]}] = recalls[i];
      recall_rows.push_back(
          {subset, std::to_string(config.eval.recall_ks[i]), FormatFixed(recalls[i], 6)});
    }
  }
  WriteCsv(out / "recall.csv", {"subset", "k", "recall"}, recall_rows);
  return result;
}

RateTable SummarizeLocalization(const fs::path& localization_csv, const fs::path& world_dir,
                                const AccuracyThresholds& thresholds) {
  const CsvTable table = ReadCsv(localization_csv);
  const CsvTable queries = ReadCsv(world_dir / "queries.csv");
  std::map<int, bool> clean;
  const int condition = queries.Column("condition");
  for (size_t r = 0; r < queries.rows.size(); ++r) {
    clean[queries.Int(r, 0)] = queries.rows[r][condition] == kOriginalCondition;
  }
  const int qcol = table.Column("query_id");
  const int pcol = table.Column("protocol");
  const int kcol = table.Column("k");
  const int tcol = table.Column("tx_err_m");
  const int rcol = table.Column("rot_err_deg");
  const int scol = table.Column("status");
  std::map<std::tuple<std::string, std::string, int>, std::vector<std::optional<PoseError>>>
      errors;
  for (size_t r = 0; r < table.rows.size(); ++r) {
    std::optional<PoseError> error;
    if (table.rows[r][scol] == "ok") error = PoseError{table.Double(r, tcol), table.Double(r, rcol)};
    const auto it = clean.find(table.Int(r, qcol));
    if (it == clean.end()) {
      throw Error(ErrorCode::kData, localization_csv.string() + ": unknown query " +
                                        table.rows[r][qcol]);
    }
    for (const auto& subset : kSubsets) {
      if (InSubset(subset, it->second)) {
        errors[{subset, table.rows[r][pcol], table.Int(r, kcol)}].push_back(error);
      }
    }
  }
  RateTable rates;
  for (const auto& [key, list] : errors) rates[key] = LocalizationRate(list, thresholds);
  return rates;
}

std::vector<AblationRow> RunAblate(const ExperimentConfig& config, const fs::path& out) {
  config.Validate();
  const fs::path world_dir = out / "world";
  const fs::path variants_dir = out / "variants";
  RunWorldgen(config, world_dir);
  RunVariants(config, world_dir, variants_dir);
  for (const auto& method : config.methods) {
    ExperimentConfig method_config = config;
    method_config.train = config.TrainFor(method, 0);
    const fs::path method_dir = out / "methods" / method.name;
    RunTrain(method_config, world_dir, variants_dir, method_dir);
    for (const uint64_t seed : config.train_seeds) {
      RunEvaluate(method_config, world_dir, method_dir / ModelFileName(seed),
                  method_dir / ("eval_seed" + std::to_string(seed)));
    }
  }
  auto rows = BuildAblationReport(config, out);
  WriteAblationReport(rows, out);
  return rows;
}

std::vector<AblationRow> BuildAblationReport(const ExperimentConfig& config,
                                             const fs::path& out) {
  // (condition, protocol, k, metric) -> method -> per-seed values
  using Key = std::tuple<std::string, std::string, int, std::string>;
  std::map<Key, std::map<std::string, std::vector<double>>> values;
  std::vector<Key> order;
  for (const auto& method : config.methods) {
    for (const uint64_t seed : config.train_seeds) {
      const fs::path eval_dir =
          out / "methods" / method.name / ("eval_seed" + std::to_string(seed));
      for (const auto& subset : kSubsets) {
        const CsvTable summary = ReadCsv(eval_dir / ("summary" + SubsetFileSuffix(subset) + ".csv"));
        for (size_t r = 0; r < summary.rows.size(); ++r) {
          for (size_t c = 2; c < summary.header.size(); ++c) {
            const Key key{subset, summary.rows[r][0], summary.Int(r, 1), summary.header[c]};
            if (!values.count(key)) order.push_back(key);
            values[key][method.name].push_back(summary.Double(r, static_cast<int>(c)));
          }
        }
      }
      const CsvTable recall = ReadCsv(eval_dir / "recall.csv");
      for (size_t r = 0; r < recall.rows.size(); ++r) {
        const Key key{recall.rows[r][0], "retrieval", recall.Int(r, 1), "recall"};
        if (!values.count(key)) order.push_back(key);
        values[key][method.name].push_back(100.0 * recall.Double(r, 2));
      }
    }
  }

  std::vector<AblationRow> rows;
  const std::string& reference = config.methods.front().name;
  for (const auto& key : order) {
    const auto& per_method = values.at(key);
    const auto ref = per_method.find(reference);
    const double ref_median = ref == per_method.end() ? 0.0 : Median(ref->second);
    for (const auto& method : config.methods) {
      const auto it = per_method.find(method.name);
      if (it == per_method.end()) continue;
      AblationRow row;
      std::tie(row.condition, row.protocol, row.k, row.metric) = key;
      row.method = method.name;
      row.median = Median(it->second);
      row.min = *std::min_element(it->second.begin(), it->second.end());
      row.max = *std::max_element(it->second.begin(), it->second.end());
      row.delta = row.median - ref_median;
      rows.push_back(row);
    }
  }
  return rows;
}

void WriteAblationReport(const std::vector<AblationRow>& rows, const fs::path& out) {
  std::vector<std::vector<std::string>> csv_rows;
  for (const auto& row : rows) {
    csv_rows.push_back({row.condition, row.method, row.protocol, std::to_string(row.k),
                        row.metric, FormatFixed(row.median, 2), FormatFixed(row.min, 2),
                        FormatFixed(row.max, 2), FormatFixed(row.delta, 2)});
  }
  WriteCsv(out / "report.csv",
           {"condition", "method", "protocol", "k", "metric", "median", "min", "max", "delta"},
           csv_rows);

  std::ofstream txt(out / "report.txt", std::ios::binary | std::ios::trunc);
  if (!txt) throw Error(ErrorCode::kData, "cannot write " + (out / "report.txt").string());
  std::string section;
  char line[256];
  for (const auto& row : rows) {
    const std::string current = row.condition + " / " + row.protocol + " k=" +
                                std::to_string(row.k) + " / " + row.metric;
    if (current != section) {
      txt << (section.empty() ? "" : "\n") << current << "\n";
      std::snprintf(line, sizeof(line), "  %-22s %8s %8s %8s %8s\n", "method", "median", "min",
                    "max", "delta");
      txt << line;
      section = current;
    }
    std::snprintf(line, sizeof(line), "  %-22s %8.2f %8.2f %8.2f %+8.2f\n", row.method.c_str(),
                  row.median, row.min, row.max, row.delta);
    txt << line;
  }
}

}  // namespace synthloc
