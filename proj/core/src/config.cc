#include "synthloc/config.h"

#include <algorithm>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "synthloc/error.h"
#include "synthloc/variants.h"

namespace synthloc {
namespace {

using json = nlohmann::json;

[[noreturn]] void ConfigError(const std::string& path, const std::string& message) {
  throw Error(ErrorCode::kConfig, path + ": " + message);
}

// Value conversions. Each Read checks the JSON type and reports `path`.
void Read(const json& j, const std::string& path, double* out) {
  if (!j.is_number()) ConfigError(path, "expected a number");
  *out = j.get<double>();
}

void Read(const json& j, const std::string& path, int* out) {
  if (!j.is_number_integer()) ConfigError(path, "expected an integer");
  const auto v = j.get<int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    ConfigError(path, "integer out of range");
  }
  *out = static_cast<int>(v);
}

void Read(const json& j, const std::string& path, uint64_t* out) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() &&
                                 j.get<int64_t>() < 0)) {
    ConfigError(path, "expected a non-negative integer");
  }
  *out = j.get<uint64_t>();
}

void Read(const json& j, const std::string& path, bool* out) {
  if (!j.is_boolean()) ConfigError(path, "expected true or false");
  *out = j.get<bool>();
}

void Read(const json& j, const std::string& path, std::string* out) {
  if (!j.is_string()) ConfigError(path, "expected a string");
  *out = j.get<std::string>();
}

template <class Enum, class Parse>
void ReadEnum(const json& j, const std::string& path, Enum* out, Parse parse) {
  std::string name;
  Read(j, path, &name);
  try {
    *out = parse(name);
  } catch (const Error&) {
    ConfigError(path, "unknown value '" + name + "'");
  }
}

void Read(const json& j, const std::string& path, TrainMode* out) {
  ReadEnum(j, path, out, ParseTrainMode);
}
void Read(const json& j, const std::string& path, SamplingMode* out) {
  ReadEnum(j, path, out, ParseSamplingMode);
}
void Read(const json& j, const std::string& path, RetrievalBackend* out) {
  ReadEnum(j, path, out, ParseBackend);
}
void Read(const json& j, const std::string& path, ThresholdMode* out) {
  ReadEnum(j, path, out, [](std::string_view name) {
    if (name == "relative") return ThresholdMode::kRelative;
    if (name == "absolute") return ThresholdMode::kAbsolute;
    throw Error(ErrorCode::kConfig, "");
  });
}

void Read(const json& j, const std::string& path, Eigen::Vector2d* out) {
  if (!j.is_array() || j.size() != 2) ConfigError(path, "expected [x, y]");
  Read(j[0], path + "[0]", &(*out)[0]);
  Read(j[1], path + "[1]", &(*out)[1]);
}

void Read(const json& j, const std::string& path, AccuracyThreshold* out) {
  if (!j.is_array() || j.size() != 3) {
    ConfigError(path, "expected [name, max_translation_m, max_rotation_deg]");
  }
  Read(j[0], path + "[0]", &out->name);
  Read(j[1], path + "[1]", &out->max_translation);
  Read(j[2], path + "[2]", &out->max_rotation_deg);
}

void Read(const json& j, const std::string& path, MethodSpec* out) {
  if (!j.is_object()) ConfigError(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    const std::string sub = path + "." + key;
    if (key == "name") Read(value, sub, &out->name);
    else if (key == "mode") Read(value, sub, &out->mode);
    else if (key == "c_tau") Read(value, sub, &out->c_tau);
    else if (key == "sampling") Read(value, sub, &out->sampling);
    else if (key == "num_variants") Read(value, sub, &out->num_variants);
    else ConfigError(sub, "unknown key");
  }
  if (out->name.empty()) ConfigError(path + ".name", "missing method name");
}

template <class T>
void Read(const json& j, const std::string& path, std::vector<T>* out) {
  if (!j.is_array()) ConfigError(path, "expected a list");
  out->clear();
  for (size_t i = 0; i < j.size(); ++i) {
    T value{};
    Read(j[i], path + "[" + std::to_string(i) + "]", &value);
    out->push_back(std::move(value));
  }
}

json ToJson(double v) { return v; }
json ToJson(int v) { return v; }
json ToJson(uint64_t v) { return v; }
json ToJson(bool v) { return v; }
json ToJson(const std::string& v) { return v; }
json ToJson(TrainMode v) { return std::string(TrainModeName(v)); }
json ToJson(SamplingMode v) { return std::string(SamplingModeName(v)); }
json ToJson(RetrievalBackend v) { return std::string(BackendName(v)); }
json ToJson(ThresholdMode v) { return v == ThresholdMode::kRelative ? "relative" : "absolute"; }
json ToJson(const Eigen::Vector2d& v) { return json::array({v.x(), v.y()}); }
json ToJson(const AccuracyThreshold& v) {
  return json::array({v.name, v.max_translation, v.max_rotation_deg});
}
json ToJson(const MethodSpec& v) {
  json j = json::object();
  j["name"] = v.name;
  j["mode"] = ToJson(v.mode);
  j["c_tau"] = v.c_tau;
  j["sampling"] = ToJson(v.sampling);
  j["num_variants"] = v.num_variants;
  return j;
}
template <class T>
json ToJson(const std::vector<T>& v) {
  json j = json::array();
  for (const auto& x : v) j.push_back(ToJson(x));
  return j;
}

// Strict reader: every key must be consumed by a Field or Section.
class Reader {
 public:
  explicit Reader(const json& root) { Push(&root, ""); }

  template <class T>
  void Field(const char* key, T& value, const char*) {
    Frame& frame = frames_.back();
    if (!frame.object) return;
    frame.known.insert(key);
    const auto it = frame.object->find(key);
    if (it != frame.object->end()) Read(*it, Join(frame.path, key), &value);
  }

  void Begin(const char* key, const char*) {
    Frame& frame = frames_.back();
    const json* child = nullptr;
    if (frame.object) {
      frame.known.insert(key);
      const auto it = frame.object->find(key);
      if (it != frame.object->end()) {
        if (!it->is_object()) ConfigError(Join(frame.path, key), "expected a section");
        child = &*it;
      }
    }
    Push(child, Join(frame.path, key));
  }

  void End() {
    const Frame& frame = frames_.back();
    if (frame.object) {
      for (const auto& [key, value] : frame.object->items()) {
        if (!frame.known.count(key)) ConfigError(Join(frame.path, key), "unknown key");
      }
    }
    frames_.pop_back();
  }

 private:
  struct Frame {
    const json* object;
    std::string path;
    std::set<std::string> known;
  };

  static std::string Join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }
  void Push(const json* object, std::string path) {
    frames_.push_back({object, std::move(path), {}});
  }

  std::vector<Frame> frames_;
};

// Emits the configuration as indented JSON, optionally with a comment line
// above each setting.
class Writer {
 public:
  explicit Writer(bool comments) : comments_(comments) { out_ << "{"; }

  template <class T>
  void Field(const char* key, const T& value, const char* doc) {
    Key(key, doc);
    out_ << ToJson(value).dump();
  }

  void Begin(const char* key, const char* doc) {
    Key(key, doc);
    out_ << "{";
    first_.push_back(true);
  }

  void End() {
    first_.pop_back();
    out_ << "\n" << Indent() << "}";
  }

  std::string Finish() {
    out_ << "\n}\n";
    return out_.str();
  }

 private:
  std::string Indent() const { return std::string(2 * first_.size(), ' '); }

  void Key(const char* key, const char* doc) {
    if (!first_.back()) out_ << ",";
    first_.back() = false;
    out_ << "\n";
    const std::string indent = std::string(2 * first_.size(), ' ');
    if (comments_ && doc && *doc) out_ << indent << "// " << doc << "\n";
    out_ << indent << json(key).dump() << ": ";
  }

  bool comments_;
  std::ostringstream out_;
  std::vector<bool> first_ = {true};
};

template <class V, class Noise>
void VisitNoise(V& v, Noise& noise) {
  v.Field("keypoint_sigma", noise.keypoint_sigma, "Keypoint jitter in pixels.");
  v.Field("descriptor_sigma", noise.descriptor_sigma,
          "Per-component descriptor noise before normalization.");
  v.Field("clutter_count", noise.clutter_count, "Clutter features added per view.");
}

template <class V, class C>
void Visit(V& v, C& c) {
  v.Field("seed", c.seed, "World generation seed.");
  v.Field("output_dir", c.output_dir, "Default output directory.");

  v.Begin("world", "Synthetic street scene.");
  v.Field("num_landmarks", c.world.num_landmarks, "Number of 3D landmarks.");
  v.Field("descriptor_dim", c.world.descriptor_dim, "Local descriptor dimension d.");
  v.Field("num_map_views", c.world.num_map_views, "Map (database) views along the street.");
  v.Field("num_queries", c.world.num_queries, "Clean query views.");
  v.Field("shifted_query_conditions", c.world.shifted_query_conditions,
          "Prompts used for the shifted twin of each clean query, round-robin.");
  v.Field("street", c.world.street, "Street waypoints in the ground plane (m).");
  v.Field("street_padding", c.world.street_padding,
          "Landmark band extension past the street ends (m).");
  v.Field("lateral_min", c.world.lateral_min, "Nearest landmark offset from the street (m).");
  v.Field("lateral_max", c.world.lateral_max, "Farthest landmark offset from the street (m).");
  v.Field("height_min", c.world.height_min, "Lowest landmark height (m).");
  v.Field("height_max", c.world.height_max, "Highest landmark height (m).");
  v.Field("camera_height", c.world.camera_height, "Camera height above ground (m).");
  v.Field("heading_jitter_deg", c.world.heading_jitter_deg, "Map view yaw jitter (deg).");
  v.Field("visibility_radius", c.world.visibility_radius, "Maximum viewing distance (m).");
  v.Field("query_translation_sigma", c.world.query_translation_sigma,
          "Query position perturbation (m).");
  v.Field("query_rotation_sigma_deg", c.world.query_rotation_sigma_deg,
          "Query rotation perturbation (deg).");
  v.Field("min_visible", c.world.min_visible, "Minimum landmarks every view must see.");
  v.Field("min_coobs", c.world.min_coobs, "Shared landmarks for a matching pair.");
  v.Begin("intrinsics", "Pinhole camera shared by all views.");
  v.Field("focal", c.world.intrinsics.focal, "Focal length (px).");
  v.Field("cx", c.world.intrinsics.principal_point[0], "Principal point x (px).");
  v.Field("cy", c.world.intrinsics.principal_point[1], "Principal point y (px).");
  v.Field("width", c.world.intrinsics.width, "Image width (px).");
  v.Field("height", c.world.intrinsics.height, "Image height (px).");
  v.End();
  v.Begin("map_noise", "Rendering noise of map views.");
  VisitNoise(v, c.world.map_noise);
  v.End();
  v.Begin("query_noise", "Rendering noise of query views.");
  VisitNoise(v, c.world.query_noise);
  v.End();
  v.End();

  v.Begin("prompts", "Simulated generative variants.");
  v.Field("seed", c.world.prompt_seed,
          "Seed of the prompt biases, shared by training variants and shifted queries.");
  v.Field("names", c.prompt_names, "Prompts used for training variants; empty means all 11.");
  v.Field("variant_seed", c.variant_seed, "Seed of the per-view variant draws.");
  v.End();

  v.Begin("match", "Local feature matching.");
  v.Field("ratio", c.match.ratio, "Lowe ratio, applied on both sides.");
  v.Field("pixel_tol", c.match.pixel_tol, "Keypoint agreement radius (px).");
  v.End();

  v.Begin("filter", "Synthetic pair validation.");
  v.Field("c_tau", c.train.c_tau, "Consistency threshold.");
  v.Field("threshold_mode", c.train.threshold_mode,
          "relative compares the score, absolute compares the kept count.");
  v.End();

  v.Begin("train", "Embedding training.");
  v.Field("mode", c.train.mode, "baseline, swap_pi, multi_k or aggregated_k.");
  v.Field("swap_probability", c.train.swap_probability,
          "swap_pi: probability of replacing the tuple by a synthetic one.");
  v.Field("num_variants", c.train.num_variants,
          "Synthetic tuples added per original (K).");
  v.Field("k_multi", c.train.k_multi,
          "multi_k: tuples per step including the original; 0 means num_variants + 1.");
  v.Field("sampling", c.train.sampling, "uniform or geometry_aware (needs c_tau > 0).");
  v.Field("num_negatives", c.train.num_negatives, "Hard negatives per tuple (M).");
  v.Field("negative_pool_size", c.train.negative_pool_size, "Views considered when mining.");
  v.Field("margin", c.train.margin, "Contrastive margin.");
  v.Field("lr", c.train.learning_rate, "Initial learning rate (cosine decay).");
  v.Field("weight_decay", c.train.weight_decay, "Decoupled weight decay.");
  v.Field("episodes", c.train.episodes, "Training episodes.");
  v.Field("pairs_per_episode", c.train.pairs_per_episode, "Oriented pairs per episode.");
  v.Field("batch_size", c.train.batch_size, "Tuple families per gradient step.");
  v.Field("embed_dim", c.train.embed_dim, "Embedding dimension e.");
  v.Field("seeds", c.train_seeds, "One model per seed; model_avg averages them.");
  v.End();

  v.Begin("retrieval", "Retrieval backend.");
  v.Field("backend", c.backend, "global_cosine or asmk.");
  v.Field("num_clusters", c.asmk.num_clusters, "ASMK codebook size.");
  v.Field("iterations", c.asmk.iterations, "k-means iterations.");
  v.Field("alpha", c.asmk.alpha, "Selectivity exponent.");
  v.Field("sel_threshold", c.asmk.sel_threshold, "Selectivity threshold (>= 0).");
  v.Field("seed", c.asmk.seed, "Codebook seed.");
  v.End();

  v.Begin("evaluation", "Localization protocols and metrics.");
  v.Field("ks", c.eval.ks, "Top-k values for EWB and SfM localization.");
  v.Field("recall_ks", c.eval.recall_ks, "k values for recall@k.");
  v.Field("recall_radius", c.eval.recall_radius, "Place recognition radius (m).");
  v.Field("thresholds", c.eval.thresholds.levels,
          "Accuracy levels [name, max m, max deg], strictest first.");
  v.Field("run_sfm", c.eval.run_sfm, "Also run the PnP+RANSAC protocol.");
  v.Begin("ransac", "PnP+RANSAC.");
  v.Field("iterations", c.eval.ransac.iterations, "RANSAC iterations.");
  v.Field("inlier_px", c.eval.ransac.inlier_px, "Inlier reprojection threshold (px).");
  v.Field("min_inliers", c.eval.ransac.min_inliers, "Minimum consensus size.");
  v.Field("seed", c.eval.ransac.seed, "Base seed; mixed with each query id.");
  v.End();
  v.End();

  v.Begin("ablation", "Methods compared by the ablate command.");
  v.Field("methods", c.methods, "Grid rows overriding train.mode, c_tau, sampling and K.");
  v.End();
}

void Wrap(const std::string& section, const std::function<void()>& check) {
  try {
    check();
  } catch (const Error& error) {
    if (error.code() == ErrorCode::kConfig) throw;
    throw Error(ErrorCode::kConfig, section + ": " + error.what());
  }
}

}  // namespace

std::vector<MethodSpec> DefaultAblationGrid() {
  return {
      {"baseline", TrainMode::kBaseline, 0.0, SamplingMode::kUniform, 2},
      {"synth_uniform", TrainMode::kAggregatedK, 0.0, SamplingMode::kUniform, 2},
      {"synth_filtered", TrainMode::kAggregatedK, 0.2, SamplingMode::kUniform, 2},
      {"synth_filtered_geo", TrainMode::kAggregatedK, 0.2, SamplingMode::kGeometryAware, 2},
  };
}

void ExperimentConfig::Validate() const {
  Wrap("world", [&] { world.Validate(); });
  Wrap("prompts", [&] { Prompts(); });
  Wrap("match", [&] {
    if (!(match.ratio > 0.0 && match.ratio <= 1.0)) {
      throw Error(ErrorCode::kConfig, "ratio must lie in (0, 1]");
    }
    if (!(match.pixel_tol >= 0.0)) throw Error(ErrorCode::kConfig, "pixel_tol must be >= 0");
  });
  Wrap("train", [&] {
    if (train_seeds.empty()) throw Error(ErrorCode::kConfig, "seeds must not be empty");
    train.Validate();
    if (train.embed_dim > world.descriptor_dim) {
      throw Error(ErrorCode::kConfig, "embed_dim exceeds world.descriptor_dim");
    }
  });
  Wrap("retrieval", [&] { asmk.Validate(); });
  Wrap("evaluation", [&] {
    if (eval.ks.empty() || eval.recall_ks.empty()) {
      throw Error(ErrorCode::kConfig, "k lists must not be empty");
    }
    for (const int k : eval.ks) {
      if (k < 1) throw Error(ErrorCode::kConfig, "ks must be >= 1");
    }
    for (const int k : eval.recall_ks) {
      if (k < 1) throw Error(ErrorCode::kConfig, "recall_ks must be >= 1");
    }
    if (!(eval.recall_radius > 0.0)) throw Error(ErrorCode::kConfig, "recall_radius must be > 0");
    eval.thresholds.Validate();
    eval.ransac.Validate();
  });
  Wrap("ablation", [&] {
    if (methods.empty()) throw Error(ErrorCode::kConfig, "methods must not be empty");
    std::set<std::string> names;
    for (const auto& method : methods) {
      if (!names.insert(method.name).second) {
        throw Error(ErrorCode::kConfig, "duplicate method '" + method.name + "'");
      }
      TrainFor(method, 0).Validate();
    }
  });
}

PromptSet ExperimentConfig::Prompts() const {
  const PromptSet all = DefaultPromptSet(world.descriptor_dim, world.prompt_seed);
  if (prompt_names.empty()) return all;
  PromptSet subset;
  for (const auto& name : prompt_names) {
    if (all.IndexOf(name) < 0) {
      throw Error(ErrorCode::kConfig, "prompts.names: unknown prompt '" + name + "'");
    }
    subset.shifts.push_back(all.Find(name));
  }
  subset.Validate();
  return subset;
}

TrainConfig ExperimentConfig::TrainFor(const MethodSpec& method, uint64_t seed) const {
  TrainConfig out = train;
  out.mode = method.mode;
  out.c_tau = method.c_tau;
  out.sampling = method.sampling;
  out.num_variants = method.num_variants;
  out.seed = seed;
  return out;
}

ExperimentConfig ParseConfig(std::string_view text) {
  json root;
  try {
    root = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& error) {
    throw Error(ErrorCode::kConfig, std::string("malformed configuration: ") + error.what());
  }
  if (!root.is_object()) throw Error(ErrorCode::kConfig, "configuration must be an object");
  ExperimentConfig config;
  Reader reader(root);
  Visit(reader, config);
  reader.End();
  config.Validate();
  return config;
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot read configuration " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return ParseConfig(text.str());
}

std::string ReferenceConfig() {
  ExperimentConfig config;
  Writer writer(true);
  Visit(writer, config);
  return writer.Finish();
}

std::string DumpConfig(const ExperimentConfig& config) {
  ExperimentConfig copy = config;
  Writer writer(false);
  Visit(writer, copy);
  return writer.Finish();
}

}  // namespace synthloc
