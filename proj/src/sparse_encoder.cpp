#include "cadscene/sparse_encoder.hpp"

#include <cmath>
#include <string>

#include "cadscene/errors.hpp"

namespace cadscene {

std::array<int, 3> kernel_offset(int o) { return {o / 9 - 1, (o / 3) % 3 - 1, o % 3 - 1}; }

SparseFeatureGrid voxelize(const PointCloud& pc, double voxel_size) {
  if (!(voxel_size > 0.0)) throw InvalidArgument("voxelize: voxel_size must be positive");
  if (pc.empty()) throw InvalidArgument("voxelize: empty cloud");
  SparseFeatureGrid grid;
  grid.point_to_voxel.reserve(pc.size());
  grid.index.reserve(pc.size());
  for (const auto& p : pc.positions) {
    const VoxelKey key = voxel_of(p, voxel_size);
    auto [it, inserted] = grid.index.try_emplace(key, static_cast<int>(grid.coords.size()));
    if (inserted) grid.coords.push_back(key);
    grid.point_to_voxel.push_back(it->second);
  }
  grid.feats = Matrix::Ones(static_cast<Eigen::Index>(grid.coords.size()), 1);
  return grid;
}

KernelMap build_kernel_map(const SparseFeatureGrid& grid) {
  KernelMap kmap;
  for (int o = 0; o < kKernelVolume; ++o) {
    const auto [dx, dy, dz] = kernel_offset(o);
    for (std::size_t v = 0; v < grid.coords.size(); ++v) {
      auto it = grid.index.find(grid.coords[v].offset(dx, dy, dz));
      if (it == grid.index.end()) continue;
      kmap.out_rows[o].push_back(static_cast<int>(v));
      kmap.in_rows[o].push_back(it->second);
    }
  }
  return kmap;
}

ConvLayer ConvLayer::zeros(int in_width, int out_width) {
  ConvLayer layer;
  layer.weights.assign(kKernelVolume, Matrix::Zero(in_width, out_width));
  layer.bias = Vector::Zero(out_width);
  return layer;
}

EncoderParams EncoderParams::initialize(const std::vector<int>& widths, double voxel_size,
                                        Rng& rng) {
  if (widths.size() < 2) throw InvalidArgument("encoder: need at least one layer");
  EncoderParams params;
  params.voxel_size = voxel_size;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    if (widths[l] < 1 || widths[l + 1] < 1) throw InvalidArgument("encoder: widths must be >= 1");
    ConvLayer layer = ConvLayer::zeros(widths[l], widths[l + 1]);
    const double bound = std::sqrt(1.0 / (kKernelVolume * widths[l]));
    std::uniform_real_distribution<double> init(-bound, bound);
    for (auto& w : layer.weights) {
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = init(rng);
    }
    params.layers.push_back(std::move(layer));
  }
  params.validate();
  return params;
}

EncoderParams EncoderParams::zeros_like(const EncoderParams& shape) {
  EncoderParams params;
  params.voxel_size = shape.voxel_size;
  for (const auto& layer : shape.layers) {
    params.layers.push_back(ConvLayer::zeros(layer.in_width(), layer.out_width()));
  }
  return params;
}

std::vector<int> EncoderParams::widths() const {
  std::vector<int> w;
  if (layers.empty()) return w;
  w.push_back(layers.front().in_width());
  for (const auto& layer : layers) w.push_back(layer.out_width());
  return w;
}

void EncoderParams::validate() const {
  if (layers.empty()) throw InvalidArgument("encoder: no layers");
  if (!(voxel_size > 0.0)) throw InvalidArgument("encoder: voxel_size must be positive");
  if (layers.front().in_width() != 1) throw DimensionError("encoder: input width must be 1");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.weights.size() != kKernelVolume) {
      throw DimensionError("encoder: layer " + std::to_string(l) + " needs 27 kernel slices");
    }
    for (const auto& w : layer.weights) {
      if (w.rows() != layer.in_width() || w.cols() != layer.out_width()) {
        throw DimensionError("encoder: inconsistent kernel shape in layer " + std::to_string(l));
      }
      if (!w.allFinite()) throw InvalidArgument("encoder: non-finite weight");
    }
    if (!layer.bias.allFinite()) throw InvalidArgument("encoder: non-finite bias");
    if (l > 0 && layers[l - 1].out_width() != layer.in_width()) {
      throw DimensionError("encoder: width mismatch between layers " + std::to_string(l - 1) +
                           " and " + std::to_string(l));
    }
  }
}

std::vector<std::span<double>> EncoderParams::tensors() {
  std::vector<std::span<double>> out;
  for (auto& layer : layers) {
    for (auto& w : layer.weights) out.emplace_back(w.data(), static_cast<std::size_t>(w.size()));
    out.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  }
  return out;
}

std::vector<std::span<const double>> EncoderParams::tensors() const {
  std::vector<std::span<const double>> out;
  for (const auto& layer : layers) {
    for (const auto& w : layer.weights) {
      out.emplace_back(w.data(), static_cast<std::size_t>(w.size()));
    }
    out.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  }
  return out;
}

Matrix sparse_conv_forward(const KernelMap& kmap, const Matrix& input, const ConvLayer& layer,
                           bool relu) {
  if (input.cols() != layer.in_width()) {
    throw DimensionError("sparse_conv_forward: input width " + std::to_string(input.cols()) +
                         " but layer expects " + std::to_string(layer.in_width()));
  }
  Matrix out = layer.bias.transpose().replicate(input.rows(), 1);
  for (int o = 0; o < kKernelVolume; ++o) {
    const auto& out_rows = kmap.out_rows[o];
    if (out_rows.empty()) continue;
    if (o == kCenterOffset) {
      out.noalias() += input * layer.weights[o];
      continue;
    }
    const Matrix gathered = input(kmap.in_rows[o], Eigen::all);
    out(out_rows, Eigen::all) += gathered * layer.weights[o];
  }
  if (relu) out = out.cwiseMax(0.0);
  return out;
}

Matrix encoder_forward(const PointCloud& pc, const EncoderParams& params, EncoderTape* tape) {
  params.validate();
  SparseFeatureGrid grid = voxelize(pc, params.voxel_size);
  KernelMap kmap = build_kernel_map(grid);

  std::vector<Matrix> inputs;
  std::vector<Matrix> pre;
  Matrix current = grid.feats;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Matrix z = sparse_conv_forward(kmap, current, params.layers[l], false);
    const bool last = l + 1 == params.layers.size();
    Matrix next = last ? z : Matrix(z.cwiseMax(0.0));
    if (tape) {
      inputs.push_back(std::move(current));
      pre.push_back(std::move(z));
    }
    current = std::move(next);
  }

  Matrix point_feats = current(grid.point_to_voxel, Eigen::all);
  if (tape) {
    tape->grid = std::move(grid);
    tape->kmap = std::move(kmap);
    tape->layer_inputs = std::move(inputs);
    tape->pre_activations = std::move(pre);
    tape->recorded = true;
  }
  return point_feats;
}

EncoderParams encoder_backward(const EncoderTape& tape, const EncoderParams& params,
                               const Matrix& point_grads) {
  if (!tape.recorded) throw StateError("encoder_backward: no cached forward pass");
  if (tape.layer_inputs.size() != params.layers.size()) {
    throw DimensionError("encoder_backward: tape does not match parameters");
  }
  const auto n_points = static_cast<Eigen::Index>(tape.grid.point_to_voxel.size());
  if (point_grads.rows() != n_points || point_grads.cols() != params.output_width()) {
    throw DimensionError("encoder_backward: upstream gradient has wrong shape");
  }

  Matrix grad = Matrix::Zero(static_cast<Eigen::Index>(tape.grid.voxel_count()),
                             params.output_width());
  for (Eigen::Index i = 0; i < n_points; ++i) {
    grad.row(tape.grid.point_to_voxel[static_cast<std::size_t>(i)]) += point_grads.row(i);
  }

  EncoderParams grads = EncoderParams::zeros_like(params);
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const bool last = l + 1 == params.layers.size();
    if (!last) grad = (tape.pre_activations[l].array() > 0.0).select(grad, 0.0);

    const Matrix& input = tape.layer_inputs[l];
    const ConvLayer& layer = params.layers[l];
    ConvLayer& g = grads.layers[l];
    g.bias = grad.colwise().sum().transpose();

    const bool need_input_grad = l > 0;
    Matrix input_grad;
    if (need_input_grad) input_grad = Matrix::Zero(input.rows(), input.cols());

    for (int o = 0; o < kKernelVolume; ++o) {
      const auto& out_rows = tape.kmap.out_rows[o];
      if (out_rows.empty()) continue;
      if (o == kCenterOffset) {
        g.weights[o].noalias() += input.transpose() * grad;
        if (need_input_grad) input_grad.noalias() += grad * layer.weights[o].transpose();
        continue;
      }
      const auto& in_rows = tape.kmap.in_rows[o];
      const Matrix out_grad = grad(out_rows, Eigen::all);
      const Matrix in_vals = input(in_rows, Eigen::all);
      g.weights[o].noalias() += in_vals.transpose() * out_grad;
      if (need_input_grad) input_grad(in_rows, Eigen::all) += out_grad * layer.weights[o].transpose();
    }
    if (need_input_grad) grad = std::move(input_grad);
  }
  return grads;
}

}  // namespace cadscene
