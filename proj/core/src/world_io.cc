#include "synthloc/world_io.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "synthloc/csv.h"
#include "synthloc/error.h"

namespace synthloc {
namespace {

namespace fs = std::filesystem;

constexpr int kWorldDigits = 9;
constexpr int kExactDigits = 17;

std::string F9(double v) { return FormatSig(v, kWorldDigits); }

std::vector<std::string> DescriptorHeader(const std::string& prefix, int dim) {
  std::vector<std::string> names;
  for (int k = 0; k < dim; ++k) names.push_back(prefix + std::to_string(k));
  return names;
}

Eigen::VectorXd ReadVector(const CsvTable& table, size_t row, int first, int dim) {
  Eigen::VectorXd v(dim);
  for (int k = 0; k < dim; ++k) v[k] = table.Double(row, first + k);
  return v;
}

void WriteFeatures(const ViewImage& view, int dim, const fs::path& path) {
  std::vector<std::string> header = {"u", "v", "landmark_id"};
  const auto desc = DescriptorHeader("d", dim);
  header.insert(header.end(), desc.begin(), desc.end());
  std::vector<std::vector<std::string>> rows;
  for (const auto& f : view.features) {
    std::vector<std::string> row = {F9(f.keypoint.x()), F9(f.keypoint.y()),
                                    std::to_string(f.landmark_id.value_or(-1))};
    for (int k = 0; k < dim; ++k) row.push_back(F9(f.descriptor[k]));
    rows.push_back(std::move(row));
  }
  WriteCsv(path, header, rows);
}

std::vector<LocalFeature> ReadFeatures(const fs::path& path, int dim) {
  const CsvTable table = ReadCsv(path);
  if (static_cast<int>(table.header.size()) != 3 + dim) {
    throw Error(ErrorCode::kData, path.string() + ": expected " + std::to_string(dim) +
                                      " descriptor columns");
  }
  const int u = table.Column("u");
  const int v = table.Column("v");
  const int lm = table.Column("landmark_id");
  std::vector<LocalFeature> features;
  for (size_t r = 0; r < table.rows.size(); ++r) {
    LocalFeature f;
    f.keypoint = Eigen::Vector2d(table.Double(r, u), table.Double(r, v));
    const int id = table.Int(r, lm);
    if (id >= 0) f.landmark_id = id;
    f.descriptor = ReadVector(table, r, 3, dim);
    features.push_back(std::move(f));
  }
  return features;
}

const std::vector<std::string> kViewHeader = {"id", "qw", "qx", "qy", "qz",
                                              "tx", "ty", "tz", "condition"};

void WriteViewTable(std::span<const ViewImage> views, const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& view : views) {
    const Eigen::Quaterniond& q = view.pose.rotation;
    const Eigen::Vector3d& c = view.pose.position;
    rows.push_back({std::to_string(view.id), F9(q.w()), F9(q.x()), F9(q.y()), F9(q.z()),
                    F9(c.x()), F9(c.y()), F9(c.z()), view.condition});
  }
  WriteCsv(path, kViewHeader, rows);
}

std::vector<ViewImage> ReadViewTable(const fs::path& path, const fs::path& features_dir,
                                     const CameraIntrinsics& intrinsics, int dim) {
  const CsvTable table = ReadCsv(path);
  if (table.header != kViewHeader) {
    throw Error(ErrorCode::kData, path.string() + ": unexpected header");
  }
  std::vector<ViewImage> views;
  for (size_t r = 0; r < table.rows.size(); ++r) {
    ViewImage view;
    view.id = table.Int(r, 0);
    const Eigen::Quaterniond q(table.Double(r, 1), table.Double(r, 2), table.Double(r, 3),
                               table.Double(r, 4));
    if (!(q.norm() > 0.0)) {
      throw Error(ErrorCode::kData, path.string() + ": zero quaternion for view " +
                                        std::to_string(view.id));
    }
    view.pose = CameraPose::FromQuaternion(
        q, Eigen::Vector3d(table.Double(r, 5), table.Double(r, 6), table.Double(r, 7)));
    view.condition = table.rows[r][8];
    view.intrinsics = intrinsics;
    view.features = ReadFeatures(features_dir / (std::to_string(view.id) + ".csv"), dim);
    views.push_back(std::move(view));
  }
  return views;
}

}  // namespace

void WriteWorld(const World& world, const fs::path& dir) {
  fs::create_directories(dir / "features");
  const int dim = world.DescriptorDim();

  std::vector<std::string> header = {"id", "x", "y", "z"};
  const auto desc = DescriptorHeader("d", dim);
  header.insert(header.end(), desc.begin(), desc.end());
  std::vector<std::vector<std::string>> rows;
  for (const auto& lm : world.landmarks) {
    std::vector<std::string> row = {std::to_string(lm.id), F9(lm.position.x()),
                                    F9(lm.position.y()), F9(lm.position.z())};
    for (int k = 0; k < dim; ++k) row.push_back(F9(lm.base_descriptor[k]));
    rows.push_back(std::move(row));
  }
  WriteCsv(dir / "landmarks.csv", header, rows);

  WriteViewTable(world.map_views, dir / "views.csv");
  WriteViewTable(world.query_views, dir / "queries.csv");

  const CameraIntrinsics intrinsics =
      world.map_views.empty() ? CameraIntrinsics{} : world.map_views.front().intrinsics;
  WriteCsv(dir / "intrinsics.csv", {"focal", "cx", "cy", "width", "height"},
           {{F9(intrinsics.focal), F9(intrinsics.principal_point.x()),
             F9(intrinsics.principal_point.y()), std::to_string(intrinsics.width),
             std::to_string(intrinsics.height)}});
  WriteCsv(dir / "world_meta.csv", {"key", "value"},
           {{"seed", std::to_string(world.seed)}, {"descriptor_dim", std::to_string(dim)}});

  for (const auto* views : {&world.map_views, &world.query_views}) {
    for (const auto& view : *views) {
      WriteFeatures(view, dim, dir / "features" / (std::to_string(view.id) + ".csv"));
    }
  }

  rows.clear();
  for (const auto& pair : world.matching_pairs) {
    rows.push_back({std::to_string(pair.a), std::to_string(pair.b), std::to_string(pair.count)});
  }
  WriteCsv(dir / "pairs.csv", {"a", "b", "count"}, rows);
}

World ReadWorld(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kData, "missing world directory " + dir.string());
  World world;

  const CsvTable meta = ReadCsv(dir / "world_meta.csv");
  int dim = -1;
  for (size_t r = 0; r < meta.rows.size(); ++r) {
    if (meta.rows[r][0] == "seed") world.seed = std::stoull(meta.rows[r][1]);
    if (meta.rows[r][0] == "descriptor_dim") dim = meta.Int(r, 1);
  }
  if (dim < 1) throw Error(ErrorCode::kData, dir.string() + ": world_meta.csv lacks descriptor_dim");

  const CsvTable intr = ReadCsv(dir / "intrinsics.csv");
  if (intr.rows.size() != 1) throw Error(ErrorCode::kData, "intrinsics.csv must have one row");
  CameraIntrinsics intrinsics;
  intrinsics.focal = intr.Double(0, intr.Column("focal"));
  intrinsics.principal_point =
      Eigen::Vector2d(intr.Double(0, intr.Column("cx")), intr.Double(0, intr.Column("cy")));
  intrinsics.width = intr.Int(0, intr.Column("width"));
  intrinsics.height = intr.Int(0, intr.Column("height"));

  const CsvTable lms = ReadCsv(dir / "landmarks.csv");
  if (static_cast<int>(lms.header.size()) != 4 + dim) {
    throw Error(ErrorCode::kData, "landmarks.csv: descriptor width does not match world_meta.csv");
  }
  for (size_t r = 0; r < lms.rows.size(); ++r) {
    Landmark lm;
    lm.id = lms.Int(r, 0);
    lm.position = Eigen::Vector3d(lms.Double(r, 1), lms.Double(r, 2), lms.Double(r, 3));
    lm.base_descriptor = ReadVector(lms, r, 4, dim);
    world.landmarks.push_back(std::move(lm));
  }

  world.map_views = ReadViewTable(dir / "views.csv", dir / "features", intrinsics, dim);
  world.query_views = ReadViewTable(dir / "queries.csv", dir / "features", intrinsics, dim);

  const CsvTable pairs = ReadCsv(dir / "pairs.csv");
  for (size_t r = 0; r < pairs.rows.size(); ++r) {
    world.matching_pairs.push_back({pairs.Int(r, 0), pairs.Int(r, 1), pairs.Int(r, 2)});
  }
  return world;
}

std::string PromptDirName(std::string_view prompt) {
  std::string out(prompt);
  std::replace(out.begin(), out.end(), ' ', '_');
  return out;
}

void WritePrompts(const PromptSet& prompts, const fs::path& path) {
  const int dim = prompts.shifts.empty()
                      ? 0
                      : static_cast<int>(prompts.shifts.front().descriptor_bias.size());
  std::vector<std::string> header = {"name",         "bias_gain",    "noise_sigma",
                                     "dropout_rate", "clutter_rate", "keypoint_sigma",
                                     "failure_rate"};
  const auto bias = DescriptorHeader("b", dim);
  header.insert(header.end(), bias.begin(), bias.end());
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : prompts.shifts) {
    if (s.descriptor_bias.size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch, "prompt biases differ in dimension");
    }
    std::vector<std::string> row = {s.name,
                                    FormatSig(s.bias_gain, kExactDigits),
                                    FormatSig(s.descriptor_noise_sigma, kExactDigits),
                                    FormatSig(s.dropout_rate, kExactDigits),
                                    FormatSig(s.clutter_rate, kExactDigits),
                                    FormatSig(s.keypoint_corruption_sigma, kExactDigits),
                                    FormatSig(s.failure_rate, kExactDigits)};
    for (int k = 0; k < dim; ++k) row.push_back(FormatSig(s.descriptor_bias[k], kExactDigits));
    rows.push_back(std::move(row));
  }
  WriteCsv(path, header, rows);
}

PromptSet ReadPrompts(const fs::path& path) {
  const CsvTable table = ReadCsv(path);
  const int dim = static_cast<int>(table.header.size()) - 7;
  if (dim < 0) throw Error(ErrorCode::kData, path.string() + ": too few columns");
  PromptSet prompts;
  for (size_t r = 0; r < table.rows.size(); ++r) {
    DomainShift s;
    s.name = table.rows[r][0];
    s.bias_gain = table.Double(r, 1);
    s.descriptor_noise_sigma = table.Double(r, 2);
    s.dropout_rate = table.Double(r, 3);
    s.clutter_rate = table.Double(r, 4);
    s.keypoint_corruption_sigma = table.Double(r, 5);
    s.failure_rate = table.Double(r, 6);
    s.descriptor_bias = ReadVector(table, r, 7, dim);
    prompts.shifts.push_back(std::move(s));
  }
  try {
    prompts.Validate();
  } catch (const Error& error) {
    throw Error(ErrorCode::kData, path.string() + ": " + error.what());
  }
  return prompts;
}

void WriteVariants(const VariantStore& variants, const fs::path& dir) {
  for (const auto& [view_id, list] : variants.variants()) {
    for (const auto& variant : list) {
      const int dim = variant.features.empty() ? 0 : variant.DescriptorDim();
      WriteFeatures(variant, dim,
                    dir / "features_variants" / PromptDirName(variant.condition) /
                        (std::to_string(view_id) + ".csv"));
    }
  }
}

VariantStore ReadVariants(const fs::path& dir, const World& world,
                          const std::vector<std::string>& prompt_names) {
  const int dim = world.DescriptorDim();
  std::map<int, std::vector<ViewImage>> variants;
  for (const auto& original : world.map_views) {
    auto& list = variants[original.id];
    for (const auto& prompt : prompt_names) {
      ViewImage view;
      view.id = original.id;
      view.pose = original.pose;
      view.intrinsics = original.intrinsics;
      view.condition = prompt;
      view.features = ReadFeatures(dir / "features_variants" / PromptDirName(prompt) /
                                       (std::to_string(original.id) + ".csv"),
                                   dim);
      list.push_back(std::move(view));
    }
  }
  return VariantStore(prompt_names, std::move(variants));
}

void WriteConsistency(const ConsistencyTable& table, double c_tau, ThresholdMode mode,
                      const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& [key, score] : table.entries()) {
    const auto& [q, p, prompt] = key;
    rows.push_back({std::to_string(q), std::to_string(p), prompt, FormatFixed(score.value, 6),
                    std::to_string(score.kept), std::to_string(score.original),
                    ValidatePair(score, c_tau, mode) ? "1" : "0"});
  }
  WriteCsv(path, {"query_id", "positive_id", "prompt", "s", "kept", "original", "valid"}, rows);
}

ConsistencyTable ReadConsistency(const fs::path& path) {
  const CsvTable csv = ReadCsv(path);
  const int q = csv.Column("query_id");
  const int p = csv.Column("positive_id");
  const int prompt = csv.Column("prompt");
  const int kept = csv.Column("kept");
  const int original = csv.Column("original");
  ConsistencyTable table;
  for (size_t r = 0; r < csv.rows.size(); ++r) {
    ConsistencyScore score;
    score.kept = csv.Int(r, kept);
    score.original = csv.Int(r, original);
    if (score.kept < 0 || score.kept > score.original) {
      throw Error(ErrorCode::kData, path.string() + ": kept exceeds original on line " +
                                        std::to_string(r + 2));
    }
    // Recomputed from the counts so that the value is exact.
    if (score.original > 0) score.value = static_cast<double>(score.kept) / score.original;
    table.Set(csv.Int(r, q), csv.Int(r, p), csv.rows[r][prompt], score);
  }
  return table;
}

void WriteModel(const EmbeddingModel& model, const fs::path& path) {
  const Eigen::MatrixXd& w = model.projection();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kData, "cannot write " + path.string());
  out << "e,d\n" << w.rows() << ',' << w.cols() << '\n';
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      out << (j ? "," : "") << FormatSig(w(i, j), kExactDigits);
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::kData, "failed writing " + path.string());
}

EmbeddingModel ReadModel(const fs::path& path) {
  RequireFile(path);
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line) || line != "e,d") {
    throw Error(ErrorCode::kData, path.string() + ": expected header 'e,d'");
  }
  int e = 0;
  int d = 0;
  char comma = 0;
  if (!std::getline(in, line)) throw Error(ErrorCode::kData, path.string() + ": missing shape");
  std::istringstream shape(line);
  if (!(shape >> e >> comma >> d) || comma != ',' || e < 1 || d < 1) {
    throw Error(ErrorCode::kData, path.string() + ": bad shape line");
  }
  Eigen::MatrixXd w(e, d);
  for (int i = 0; i < e; ++i) {
    if (!std::getline(in, line)) throw Error(ErrorCode::kData, path.string() + ": truncated");
    std::istringstream row(line);
    std::string field;
    for (int j = 0; j < d; ++j) {
      if (!std::getline(row, field, ',')) {
        throw Error(ErrorCode::kData, path.string() + ": short row " + std::to_string(i));
      }
      try {
        size_t used = 0;
        w(i, j) = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kData, path.string() + ": bad value '" + field + "'");
      }
    }
  }
  return EmbeddingModel(w);
}

void WriteTrace(std::span<const SeedTrace> traces, const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& trace : traces) {
    for (const auto& stats : trace.episodes) {
      rows.push_back({std::to_string(trace.seed), std::to_string(stats.episode),
                      FormatSig(stats.mean_loss, kWorldDigits),
                      FormatSig(stats.synth_fraction, kWorldDigits)});
    }
  }
  WriteCsv(path, {"seed", "episode", "mean_loss", "synth_fraction"}, rows);
}

}  // namespace synthloc
