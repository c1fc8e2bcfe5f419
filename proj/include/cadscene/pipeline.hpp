#pragma once

#include <string>
#include <vector>

#include "cadscene/config.hpp"
#include "cadscene/eval.hpp"
#include "cadscene/objective.hpp"

namespace cadscene {

// Glue shared by the command-line tool and the acceptance suite.

/// Seed of the stream that draws model point samples from meshes, kept
/// apart from the per-step training streams.
Rng sampling_rng(std::uint64_t seed);

/// Manifest models (sampled with sampling_rng), backgrounds and the anchor
/// table for the manifest's classes.
struct TrainingInputs {
  TrainData data;
  AnchorTable table;
};
TrainingInputs load_training_inputs(const TrainRunConfig& config);

TrainResult run_training(const TrainRunConfig& config, const EpochCallback& on_epoch = {});

/// `config.scenes` scenes; scene s draws from derive_rng(seed, 0, s, 0).
std::vector<SimulatedScene> simulate_scenes(const std::vector<LabeledModel>& models,
                                            const std::vector<PointCloud>& backgrounds,
                                            const SimulateConfig& config, std::uint64_t seed);

/// Inference on every scene, then salient-detection metrics for every
/// table class.
EvalReport evaluate_scenes(const std::vector<SimulatedScene>& scenes, const Checkpoint& checkpoint,
                           const AnchorTable& table, ApPooling pooling = ApPooling::kPooled);

/// Probability file: a "# classes a b c" header then one row of C values
/// per point.
void write_probabilities(const std::filesystem::path& path, const Matrix& probs,
                         const std::vector<std::string>& class_names);
Matrix read_probabilities(const std::filesystem::path& path, std::vector<std::string>* class_names);

/// Instance table for a simulated scene.
Json scene_sidecar(const SimulatedScene& scene, const std::vector<std::string>& class_names);

}  // namespace cadscene
