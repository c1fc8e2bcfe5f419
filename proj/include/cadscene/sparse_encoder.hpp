#pragma once

#include <array>
#include <span>
#include <unordered_map>
#include <vector>

#include "cadscene/geometry.hpp"
#include "cadscene/linalg.hpp"
#include "cadscene/voxel_key.hpp"

namespace cadscene {

inline constexpr double kDefaultVoxelSize = 0.05;
inline constexpr int kKernelVolume = 27;
inline constexpr int kCenterOffset = 13;

/// Offset index o in [0, 27) <-> (dx, dy, dz) in {-1, 0, 1}^3, with
/// o = 9 (dx + 1) + 3 (dy + 1) + (dz + 1).
std::array<int, 3> kernel_offset(int o);

/// Active voxels and their features. Rows follow first occurrence in the
/// source cloud.
struct SparseFeatureGrid {
  std::vector<VoxelKey> coords;
  Matrix feats;
  std::unordered_map<VoxelKey, int, VoxelKeyHash> index;
  std::vector<int> point_to_voxel;

  std::size_t voxel_count() const { return coords.size(); }
};

/// coord = floor(position / voxel_size); initial feature is a single 1.
SparseFeatureGrid voxelize(const PointCloud& pc, double voxel_size);

/// For each kernel offset, the (output row, input row) pairs where both
/// voxels are active. Within one offset both row lists are duplicate-free.
struct KernelMap {
  std::array<std::vector<int>, kKernelVolume> out_rows;
  std::array<std::vector<int>, kKernelVolume> in_rows;
};

KernelMap build_kernel_map(const SparseFeatureGrid& grid);

struct ConvLayer {
  std::vector<Matrix> weights;  // kKernelVolume matrices, each in_width x out_width
  Vector bias;

  int in_width() const { return weights.empty() ? 0 : static_cast<int>(weights.front().rows()); }
  int out_width() const { return static_cast<int>(bias.size()); }

  static ConvLayer zeros(int in_width, int out_width);
};

/// Sparse 3x3x3 convolution stack. Every layer but the last is followed by a
/// ReLU.
struct EncoderParams {
  std::vector<ConvLayer> layers;
  double voxel_size = kDefaultVoxelSize;

  /// Weights uniform in +-sqrt(1 / (27 in_width)), biases zero.
  static EncoderParams initialize(const std::vector<int>& widths, double voxel_size, Rng& rng);
  /// Same shapes, all zeros. Used for gradient accumulators.
  static EncoderParams zeros_like(const EncoderParams& shape);

  std::vector<int> widths() const;
  int output_width() const { return layers.empty() ? 0 : layers.back().out_width(); }
  void validate() const;

  /// Views over every trainable tensor in a fixed order.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
};

/// out[v] = bias + sum_o W[o]^T feat[v + o] over active neighbours, with an
/// optional ReLU.
Matrix sparse_conv_forward(const KernelMap& kmap, const Matrix& input, const ConvLayer& layer,
                           bool relu);

/// Everything the backward pass needs from one forward pass.
struct EncoderTape {
  SparseFeatureGrid grid;
  KernelMap kmap;
  std::vector<Matrix> layer_inputs;
  std::vector<Matrix> pre_activations;
  bool recorded = false;
};

/// Per-point features (N x output_width): voxelize, run the stack, then copy
/// each voxel's feature to its points. Fills `tape` when given.
Matrix encoder_forward(const PointCloud& pc, const EncoderParams& params,
                       EncoderTape* tape = nullptr);

/// Parameter gradients for per-point upstream gradients (N x output_width).
/// Throws StateError when the tape holds no forward pass.
EncoderParams encoder_backward(const EncoderTape& tape, const EncoderParams& params,
                               const Matrix& point_grads);

}  // namespace cadscene
