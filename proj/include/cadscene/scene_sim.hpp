#pragma once

#include <optional>
#include <vector>

#include "cadscene/geometry.hpp"

namespace cadscene {

struct XYBounds {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;
};

/// Augmentation knobs for crowded-scene simulation.
struct AugmentConfig {
  double scale_min = 0.9;
  double scale_max = 1.1;
  double rotation_min = 0.0;  // radians about +z
  double rotation_max = 6.283185307179586;
  int crop_anchor_min = 2;
  int crop_anchor_max = 5;
  double crop_prob = 1.0;
  double overlap_voxel = 0.05;
  double overlap_keep_prob = 0.5;
  double floor_percentile = 1.0;
  // Used for floor placement when there is no background scan.
  XYBounds scene_bounds{-1.5, 1.5, -1.5, 1.5};
  // Gaussian noise on model points after placement; 0 disables it.
  double jitter_sigma = 0.0;

  /// Throws InvalidArgument naming the first violated constraint.
  void validate() const;
};

struct LabeledModel {
  PointCloud cloud;
  int class_id = 0;
};

/// One contiguous run of points in a composed scene.
struct InstanceRecord {
  int instance_id = kNoInstance;
  int class_id = kBackgroundLabel;
  PointSource source = PointSource::kModel;
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct SimulatedScene {
  PointCloud cloud;               // labels, instance ids and sources always present
  std::vector<int> class_set;     // sorted model classes present in the cloud
  std::vector<InstanceRecord> instances;
};

/// Picks k anchors (k uniform in [crop_anchor_min, crop_anchor_max]),
/// assigns every point to its nearest anchor (ties to the lower anchor
/// index) and removes one anchor's cluster. Applied with probability
/// crop_prob; otherwise the input is returned unchanged.
PointCloud anchor_crop(const PointCloud& pc, const AugmentConfig& config, Rng& rng);

struct AnchorCropTrace {
  PointCloud cloud;
  bool applied = false;
  std::vector<Vec3> anchors;
  std::size_t dropped = 0;  // index into anchors
};
/// anchor_crop that also reports the anchors and the removed cluster.
AnchorCropTrace anchor_crop_traced(const PointCloud& pc, const AugmentConfig& config, Rng& rng);

/// Translates the model so that its lowest point sits on floor_z and its
/// centroid xy is uniform inside `bounds`.
PointCloud place_on_floor(const PointCloud& model, double floor_z, const XYBounds& bounds,
                          Rng& rng);

/// z value at `percentile` (0-100, linear interpolation between order
/// statistics).
double estimate_floor(const PointCloud& scene, double percentile = 1.0);

/// Points of either cloud sharing an overlap_voxel cell with the other cloud
/// are kept independently with probability overlap_keep_prob. Scene points
/// draw first, then model points.
std::pair<PointCloud, PointCloud> resolve_overlap(const PointCloud& scene_pts,
                                                  const PointCloud& model_pts,
                                                  const AugmentConfig& config, Rng& rng);

/// Adds isotropic Gaussian noise to every position.
PointCloud jitter(const PointCloud& pc, double sigma, Rng& rng);

/// Scales about the centroid so that the z extent equals `height`.
PointCloud normalize_height(const PointCloud& pc, double height);

/// Composes a labeled scene. Each model is rotated, scaled, cropped and put
/// on the floor, then overlap-filtered against everything already placed.
/// Background points get kBackgroundLabel.
/// `count` models drawn without replacement, or with replacement when the
/// pool is smaller than `count`.
std::vector<LabeledModel> pick_models(const std::vector<LabeledModel>& pool, int count, Rng& rng);

SimulatedScene simulate_scene(const std::optional<PointCloud>& background,
                              const std::vector<LabeledModel>& models,
                              const AugmentConfig& config, Rng& rng);

}  // namespace cadscene
