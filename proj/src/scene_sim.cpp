#include "cadscene/scene_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "cadscene/errors.hpp"
#include "cadscene/voxel_key.hpp"

namespace cadscene {

namespace {

std::unordered_set<VoxelKey, VoxelKeyHash> occupied_cells(const PointCloud& pc, double cell) {
  std::unordered_set<VoxelKey, VoxelKeyHash> cells;
  cells.reserve(pc.size());
  for (const auto& p : pc.positions) cells.insert(voxel_of(p, cell));
  return cells;
}

std::vector<bool> overlap_mask(const PointCloud& pc,
                               const std::unordered_set<VoxelKey, VoxelKeyHash>& other_cells,
                               double cell, double keep_prob, Rng& rng) {
  std::bernoulli_distribution keep(keep_prob);
  std::vector<bool> mask(pc.size(), true);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    if (other_cells.contains(voxel_of(pc.positions[i], cell))) mask[i] = keep(rng);
  }
  return mask;
}

PointCloud annotate(PointCloud pc, int label, int instance, PointSource source) {
  const std::size_t n = pc.size();
  pc.labels = std::vector<int>(n, label);
  pc.instance_ids = std::vector<int>(n, instance);
  pc.sources = std::vector<PointSource>(n, source);
  return pc;
}

}  // namespace

void AugmentConfig::validate() const {
  if (!(scale_min > 0.0 && scale_min <= scale_max)) {
    throw InvalidArgument("augment: need 0 < scale_min <= scale_max");
  }
  if (!(rotation_min <= rotation_max)) throw InvalidArgument("augment: rotation range inverted");
  if (!(crop_anchor_min >= 1 && crop_anchor_min <= crop_anchor_max)) {
    throw InvalidArgument("augment: need 1 <= crop_anchor_min <= crop_anchor_max");
  }
  if (!(crop_prob >= 0.0 && crop_prob <= 1.0)) throw InvalidArgument("augment: crop_prob not in [0,1]");
  if (!(overlap_voxel > 0.0)) throw InvalidArgument("augment: overlap_voxel must be positive");
  if (!(overlap_keep_prob >= 0.0 && overlap_keep_prob <= 1.0)) {
    throw InvalidArgument("augment: overlap_keep_prob not in [0,1]");
  }
  if (!(floor_percentile >= 0.0 && floor_percentile <= 100.0)) {
    throw InvalidArgument("augment: floor_percentile not in [0,100]");
  }
  if (!(scene_bounds.x_min <= scene_bounds.x_max && scene_bounds.y_min <= scene_bounds.y_max)) {
    throw InvalidArgument("augment: scene bounds inverted");
  }
  if (!(jitter_sigma >= 0.0)) throw InvalidArgument("augment: jitter_sigma must be >= 0");
}

PointCloud anchor_crop(const PointCloud& pc, const AugmentConfig& config, Rng& rng) {
  return anchor_crop_traced(pc, config, rng).cloud;
}

AnchorCropTrace anchor_crop_traced(const PointCloud& pc, const AugmentConfig& config, Rng& rng) {
  if (config.crop_anchor_min < 1 || config.crop_anchor_min > config.crop_anchor_max) {
    throw InvalidArgument("anchor_crop: invalid anchor range");
  }
  if (pc.size() < static_cast<std::size_t>(config.crop_anchor_max)) {
    throw InvalidArgument("anchor_crop: cloud has " + std::to_string(pc.size()) +
                          " points, fewer than crop_anchor_max");
  }
  AnchorCropTrace trace;
  std::bernoulli_distribution apply(config.crop_prob);
  if (!apply(rng)) {
    trace.cloud = pc;
    return trace;
  }
  trace.applied = true;

  std::uniform_int_distribution<int> anchor_count(config.crop_anchor_min, config.crop_anchor_max);
  const auto k = static_cast<std::size_t>(anchor_count(rng));

  // Partial Fisher-Yates: the first k entries become the anchors.
  std::vector<std::size_t> order(pc.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<Vec3> anchors;
  for (std::size_t i = 0; i < k; ++i) anchors.push_back(pc.positions[order[i]]);

  std::uniform_int_distribution<std::size_t> drop_pick(0, k - 1);
  const std::size_t dropped = drop_pick(rng);

  std::vector<bool> keep(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    std::size_t nearest = 0;
    double best = (pc.positions[i] - anchors[0]).squaredNorm();
    for (std::size_t a = 1; a < k; ++a) {
      const double d = (pc.positions[i] - anchors[a]).squaredNorm();
      if (d < best) {
        best = d;
        nearest = a;
      }
    }
    keep[i] = nearest != dropped;
  }
  trace.cloud = pc.select(keep);
  trace.anchors = std::move(anchors);
  trace.dropped = dropped;
  return trace;
}

PointCloud place_on_floor(const PointCloud& model, double floor_z, const XYBounds& bounds,
                          Rng& rng) {
  if (model.empty()) throw InvalidArgument("place_on_floor: empty model");
  if (!(bounds.x_min <= bounds.x_max && bounds.y_min <= bounds.y_max) ||
      !std::isfinite(bounds.x_min) || !std::isfinite(bounds.x_max) ||
      !std::isfinite(bounds.y_min) || !std::isfinite(bounds.y_max)) {
    throw InvalidArgument("place_on_floor: degenerate bounds");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double tx = bounds.x_min + unit(rng) * (bounds.x_max - bounds.x_min);
  const double ty = bounds.y_min + unit(rng) * (bounds.y_max - bounds.y_min);

  const Vec3 c = centroid(model);
  double min_z = model.positions.front().z();
  for (const auto& p : model.positions) min_z = std::min(min_z, p.z());

  PointCloud out = model;
  for (auto& p : out.positions) {
    p.x() = p.x() - c.x() + tx;
    p.y() = p.y() - c.y() + ty;
    p.z() = p.z() - min_z + floor_z;
  }
  return out;
}

double estimate_floor(const PointCloud& scene, double percentile) {
  if (scene.empty()) throw InvalidArgument("estimate_floor: empty scene");
  std::vector<double> z;
  z.reserve(scene.size());
  for (const auto& p : scene.positions) z.push_back(p.z());
  std::sort(z.begin(), z.end());
  const double rank = std::clamp(percentile, 0.0, 100.0) / 100.0 * static_cast<double>(z.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, z.size() - 1);
  const double t = rank - static_cast<double>(lo);
  return z[lo] + t * (z[hi] - z[lo]);
}

std::pair<PointCloud, PointCloud> resolve_overlap(const PointCloud& scene_pts,
                                                  const PointCloud& model_pts,
                                                  const AugmentConfig& config, Rng& rng) {
  const double cell = config.overlap_voxel;
  const auto scene_cells = occupied_cells(scene_pts, cell);
  const auto model_cells = occupied_cells(model_pts, cell);
  const auto scene_keep = overlap_mask(scene_pts, model_cells, cell, config.overlap_keep_prob, rng);
  const auto model_keep = overlap_mask(model_pts, scene_cells, cell, config.overlap_keep_prob, rng);
  return {scene_pts.select(scene_keep), model_pts.select(model_keep)};
}

PointCloud jitter(const PointCloud& pc, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw InvalidArgument("jitter: sigma must be >= 0");
  PointCloud out = pc;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& p : out.positions) {
    p.x() += noise(rng);
    p.y() += noise(rng);
    p.z() += noise(rng);
  }
  return out;
}

PointCloud normalize_height(const PointCloud& pc, double height) {
  if (!(height > 0.0)) throw InvalidArgument("normalize_height: height must be positive");
  const auto [lo, hi] = bounding_box(pc);
  const double extent = hi.z() - lo.z();
  if (!(extent > 0.0)) throw InvalidArgument("normalize_height: cloud is flat in z");
  return scale(pc, height / extent);
}

SimulatedScene simulate_scene(const std::optional<PointCloud>& background,
                              const std::vector<LabeledModel>& models,
                              const AugmentConfig& config, Rng& rng) {
  config.validate();
  if (models.empty()) throw InvalidArgument("simulate_scene: no models");

  PointCloud composed;
  double floor_z = 0.0;
  XYBounds bounds = config.scene_bounds;
  if (background && !background->empty()) {
    composed = annotate(*background, kBackgroundLabel, kNoInstance, PointSource::kBackground);
    floor_z = estimate_floor(*background, config.floor_percentile);
    const auto [lo, hi] = bounding_box(*background);
    bounds = {lo.x(), hi.x(), lo.y(), hi.y()};
  }

  std::uniform_real_distribution<double> angle(config.rotation_min, config.rotation_max);
  std::uniform_real_distribution<double> factor(config.scale_min, config.scale_max);

  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto& model = models[m];
    if (model.class_id < 0) throw InvalidArgument("simulate_scene: negative model class id");
    if (model.cloud.empty()) throw InvalidArgument("simulate_scene: empty model cloud");
    PointCloud pc = rotate_z(model.cloud, angle(rng));
    pc = scale(pc, factor(rng));
    pc = anchor_crop(pc, config, rng);
    pc = place_on_floor(pc, floor_z, bounds, rng);
    if (config.jitter_sigma > 0.0) pc = jitter(pc, config.jitter_sigma, rng);
    pc = annotate(std::move(pc), model.class_id, static_cast<int>(m), PointSource::kModel);

    auto [kept_scene, kept_model] = resolve_overlap(composed, pc, config, rng);
    composed = std::move(kept_scene);
    composed.append(kept_model);
  }

  SimulatedScene scene;
  scene.cloud = std::move(composed);
  if (scene.cloud.empty()) return scene;

  // Runs stay contiguous: overlap filtering removes points but never reorders.
  const auto& ids = *scene.cloud.instance_ids;
  const auto& labels = *scene.cloud.labels;
  const auto& sources = *scene.cloud.sources;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (scene.instances.empty() || scene.instances.back().instance_id != ids[i]) {
      scene.instances.push_back({ids[i], labels[i], sources[i], i, i});
    }
    scene.instances.back().end = i + 1;
    if (sources[i] == PointSource::kModel) scene.class_set.push_back(labels[i]);
  }
  std::sort(scene.class_set.begin(), scene.class_set.end());
  scene.class_set.erase(std::unique(scene.class_set.begin(), scene.class_set.end()),
                        scene.class_set.end());
  return scene;
}

std::vector<LabeledModel> pick_models(const std::vector<LabeledModel>& pool, int count, Rng& rng) {
  if (pool.empty()) throw InvalidArgument("pick_models: empty model pool");
  if (count < 1) throw InvalidArgument("pick_models: count must be positive");
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<LabeledModel> picked;
  const auto n = static_cast<std::size_t>(count);
  if (n <= pool.size()) {
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
      std::swap(order[i], order[pick(rng)]);
      picked.push_back(pool[order[i]]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (std::size_t i = 0; i < n; ++i) picked.push_back(pool[pick(rng)]);
  }
  return picked;
}

}  // namespace cadscene
