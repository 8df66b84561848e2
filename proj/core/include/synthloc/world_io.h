#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synthloc/embed.h"
#include "synthloc/geometry.h"
#include "synthloc/training.h"
#include "synthloc/types.h"
#include "synthloc/variants.h"

namespace synthloc {

// World directory layout:
//   landmarks.csv       id,x,y,z,d0..
//   views.csv           map views:   id,qw,qx,qy,qz,tx,ty,tz,condition
//   queries.csv         query views: same columns
//   intrinsics.csv      focal,cx,cy,width,height (shared by all views)
//   world_meta.csv      key,value
//   features/<id>.csv   u,v,landmark_id (-1 for clutter),d0..
//   pairs.csv           a,b,count
// (tx,ty,tz) is the camera center. Floats use 9 significant digits.
void WriteWorld(const World& world, const std::filesystem::path& dir);
World ReadWorld(const std::filesystem::path& dir);

// Directory name used for a prompt: spaces become underscores.
std::string PromptDirName(std::string_view prompt);

// prompts.csv: name, severity parameters and the bias vector.
void WritePrompts(const PromptSet& prompts, const std::filesystem::path& path);
PromptSet ReadPrompts(const std::filesystem::path& path);

// features_variants/<prompt dir>/<view id>.csv under `dir`.
void WriteVariants(const VariantStore& variants, const std::filesystem::path& dir);
// Poses and intrinsics come from the world's map views.
VariantStore ReadVariants(const std::filesystem::path& dir, const World& world,
                          const std::vector<std::string>& prompt_names);

// query_id,positive_id,prompt,s,kept,original,valid; s at 6 decimals.
void WriteConsistency(const ConsistencyTable& table, double c_tau, ThresholdMode mode,
                      const std::filesystem::path& path);
ConsistencyTable ReadConsistency(const std::filesystem::path& path);

// Header "e,d", then e rows of d values at 17 significant digits.
void WriteModel(const EmbeddingModel& model, const std::filesystem::path& path);
EmbeddingModel ReadModel(const std::filesystem::path& path);

struct SeedTrace {
  uint64_t seed = 0;
  std::vector<EpisodeStats> episodes;
};

// seed,episode,mean_loss,synth_fraction
void WriteTrace(std::span<const SeedTrace> traces, const std::filesystem::path& path);

}  // namespace synthloc
