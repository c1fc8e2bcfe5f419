#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cadscene/adam.hpp"
#include "cadscene/checkpoint.hpp"
#include "cadscene/scene_sim.hpp"

namespace cadscene {

struct LossResult {
  double loss = 0.0;
  Matrix feature_grad;     // N x D
  Matrix projection_grad;  // E x D, gradient on the anchor projection
};

/// Mean per-point cross-entropy of softmax_c(x . h_c) at the true class.
/// Every label must index an anchor; callers drop background points first.
LossResult contrastive_loss(const Matrix& features, std::span<const int> labels,
                            const AnchorTable& table);

/// softmax over classes of (x . h_c) / temperature.
Vector class_probs(const Vector& feature, const AnchorTable& table, double temperature = 1.0);
Matrix class_probs(const Matrix& features, const AnchorTable& table, double temperature = 1.0);

/// Architecture of the trainable pipeline.
struct ModelConfig {
  std::vector<int> widths{1, 32, 64, 96};
  double voxel_size = kDefaultVoxelSize;
  bool use_dcr = true;
  int prototypes = 128;
  int attention_dim = 16;
  double lambda = 0.5;
  double temperature = 1.0;

  void validate() const;
};

struct TrainConfig {
  int epochs = 200;
  int steps_per_epoch = 16;
  int models_per_scene = 4;  // Q + 1
  int scenes_per_step = 1;
  AdamConfig adam;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

/// Labeled CAD point clouds, optional unlabeled scans and the anchors.
struct TrainData {
  std::vector<LabeledModel> models;
  std::vector<PointCloud> backgrounds;
  AugmentConfig augment;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  double initial_loss = 0.0;  // loss of the very first step, before any update
  std::vector<EpochRecord> log;
};

/// Fresh parameters for `config`; draws from a generator seeded with `seed`.
/// Also initializes the table's projection.
Checkpoint initialize_checkpoint(const ModelConfig& config, AnchorTable& table, std::uint64_t seed);

/// Loss and exact gradients of one labeled cloud under the given state.
/// Points labelled kBackgroundLabel pass through the encoder but carry no
/// loss. `labeled_points` is zero when nothing carries a label.
struct SceneGradients {
  double loss = 0.0;
  std::size_t labeled_points = 0;
  EncoderParams encoder;
  std::optional<PrototypeBank> bank;
  Matrix projection;
};
SceneGradients scene_gradients(const PointCloud& cloud, const Checkpoint& state,
                               const AnchorTable& table);
/// Forward only.
double scene_loss(const PointCloud& cloud, const Checkpoint& state, const AnchorTable& table);

/// One training scene: picks models, optionally a background scan, and
/// composes them.
SimulatedScene draw_scene(const TrainData& data, int models_per_scene, Rng& rng);

/// Generator for (seed, epoch, step, slot); gives every simulated scene an
/// independent, reproducible stream.
Rng derive_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t step, std::uint64_t slot);

/// Called after every epoch; a false return stops training early.
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Simulate -> encode -> project -> contrastive loss -> Adam, on fresh
/// scenes every step. Throws DivergenceError on a non-finite loss.
TrainResult train(const TrainData& data, AnchorTable table, const ModelConfig& model,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Per-point class probabilities (N x C) for an unlabeled scene. The table
/// may hold more classes than the checkpoint was trained on.
Matrix infer_scene(const PointCloud& scene, const Checkpoint& checkpoint, AnchorTable table);

}  // namespace cadscene
