#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cadscene/lang_anchor.hpp"
#include "cadscene/objective.hpp"
#include "cadscene/scene_sim.hpp"

namespace cadscene {

using Json = nlohmann::ordered_json;

/// A set of CAD models with class names.
///
///   {"classes": "classes.txt", "points_per_model": 512,
///    "models": [{"mesh": "meshes/a.off", "class": "chair"}, ...],
///    "backgrounds": ["scan0.txt"]}
///
/// Relative paths resolve against the manifest's directory. Classes are
/// given either as a class-list file or inline as an array of names.
struct Manifest {
  struct Entry {
    std::filesystem::path mesh;
    int class_id = 0;
  };
  std::vector<std::string> class_names;
  std::size_t points_per_model = 512;
  std::vector<Entry> models;
  std::vector<std::filesystem::path> backgrounds;
};

Manifest load_manifest(const std::filesystem::path& path);

/// Loads every mesh and draws points_per_model Poisson-disk samples from it,
/// in manifest order.
std::vector<LabeledModel> sample_manifest(const Manifest& manifest, Rng& rng);
std::vector<PointCloud> load_backgrounds(const Manifest& manifest);

/// Options for `simulate`.
struct SimulateConfig {
  int scenes = 1;
  int models_per_scene = 4;
  AugmentConfig augment;
};

/// Everything `train` needs besides the files it points at.
struct TrainRunConfig {
  std::uint64_t seed = 0;
  int threads = 1;
  std::filesystem::path manifest;
  std::filesystem::path embeddings;
  AnchorOptions anchors;
  ModelConfig model;
  TrainConfig train;
  AugmentConfig augment;
};

/// Strict readers: unknown keys and wrong types raise ConfigError naming
/// the key path (e.g. "train.adam.lr"). Missing keys keep their defaults.
/// Relative paths resolve against `base_dir`.
TrainRunConfig parse_train_config(const Json& j, const std::filesystem::path& base_dir);
TrainRunConfig load_train_config(const std::filesystem::path& path);
SimulateConfig parse_simulate_config(const Json& j);
AugmentConfig parse_augment(const Json& j, const std::string& key_path);

/// Fully resolved form, every field present. Parsing it again gives the same config.
Json to_json(const TrainRunConfig& c);
Json to_json(const SimulateConfig& c);
Json to_json(const AugmentConfig& c);

Json read_json(const std::filesystem::path& path);

}  // namespace cadscene
