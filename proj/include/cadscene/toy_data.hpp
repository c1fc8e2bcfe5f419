#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cadscene/geometry.hpp"
#include "cadscene/linalg.hpp"
#include "cadscene/scene_sim.hpp"

namespace cadscene {

/// Small procedural stand-in for a CAD model collection: spheres, boxes and
/// cylinders in a few sizes, split into training and held-out variants.
/// "ball" is an extra class that never appears in training; its embedding
/// sits close to "sphere" so the zero-shot path has something to find.
inline const std::vector<std::string> kToyClasses{"sphere", "box", "cylinder"};
inline constexpr const char* kToyUnseenClass = "ball";

struct ToyMesh {
  std::string name;  // file stem, e.g. "sphere_0"
  int class_id = 0;  // index into kToyClasses, or 3 for the unseen class
  TriangleMesh mesh;
};

struct ToyMeshes {
  std::vector<ToyMesh> train;
  std::vector<ToyMesh> heldout;
  std::vector<ToyMesh> unseen;
};

ToyMeshes toy_meshes();

/// Word vectors for the toy classes plus a few distractor tokens.
/// Deterministic in `seed`.
struct ToyEmbeddings {
  std::vector<std::string> tokens;
  Matrix vectors;  // tokens x dim
};
ToyEmbeddings toy_embeddings(int dim = 24, std::uint64_t seed = 7);

/// Poisson-disk samples every mesh once.
std::vector<LabeledModel> sample_models(const std::vector<ToyMesh>& meshes, std::size_t points,
                                        Rng& rng);

/// Augmentation used for the toy set: no background scan, a 2 x 2 m floor.
AugmentConfig toy_augment();

/// Writes meshes/, classes.txt, embeddings.txt, manifest_{train,heldout,unseen}.json
/// and train.json under `dir`.
void write_toy_dataset(const std::filesystem::path& dir, std::uint64_t seed = 7);

}  // namespace cadscene
