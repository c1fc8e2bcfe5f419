#pragma once

// Independent reference implementations used only by tests. They follow the
// textbook definitions directly and share no code with the library.

#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "cadscene/sparse_encoder.hpp"

namespace cadscene::test {

// Zero-padded dense 3D volume.
struct DenseVolume {
  int size;
  int channels;
  std::vector<double> data;  // ((x * size + y) * size + z) * channels + c

  DenseVolume(int s, int ch)
      : size(s), channels(ch), data(static_cast<std::size_t>(s * s * s * ch), 0.0) {}
  double& at(int x, int y, int z, int c) {
    return data[static_cast<std::size_t>(((x * size + y) * size + z) * channels + c)];
  }
  double get(int x, int y, int z, int c) const {
    if (x < 0 || y < 0 || z < 0 || x >= size || y >= size || z >= size) return 0.0;
    return data[static_cast<std::size_t>(((x * size + y) * size + z) * channels + c)];
  }
};

// Full 3x3x3 correlation at every site, no activation.
inline DenseVolume dense_conv(const DenseVolume& in, const ConvLayer& layer) {
  DenseVolume out(in.size, layer.out_width());
  for (int x = 0; x < in.size; ++x)
    for (int y = 0; y < in.size; ++y)
      for (int z = 0; z < in.size; ++z)
        for (int co = 0; co < layer.out_width(); ++co) {
          double acc = layer.bias(co);
          for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dz = -1; dz <= 1; ++dz) {
                const int o = (dx + 1) * 9 + (dy + 1) * 3 + (dz + 1);
                for (int ci = 0; ci < layer.in_width(); ++ci) {
                  acc += layer.weights[o](ci, co) * in.get(x + dx, y + dy, z + dz, ci);
                }
              }
          out.at(x, y, z, co) = acc;
        }
  return out;
}

// AP from the definition: positive i is credited with the precision of the
// set {j : s_j >= s_i}, everything retrieved no later than i's tie group.
inline double set_ap(const std::vector<double>& s, const std::vector<int>& y) {
  double total = 0.0;
  int positives = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    ++positives;
    int retrieved = 0, hits = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s[j] >= s[i]) {
        ++retrieved;
        hits += y[j];
      }
    }
    total += static_cast<double>(hits) / retrieved;
  }
  return total / positives;
}

// mIoU from a confusion matrix over classes 0..classes-1; classes absent
// from both labellings are left out.
inline double confusion_miou(const std::vector<int>& pred, const std::vector<int>& gt, int classes) {
  std::map<std::pair<int, int>, int> confusion;
  for (std::size_t i = 0; i < pred.size(); ++i) confusion[{gt[i], pred[i]}]++;
  double sum = 0.0;
  int count = 0;
  for (int c = 0; c < classes; ++c) {
    int tp = confusion[{c, c}], row = 0, col = 0;
    for (int k = 0; k < classes; ++k) {
      row += confusion[{c, k}];
      col += confusion[{k, c}];
    }
    if (row + col == 0) continue;
    sum += static_cast<double>(tp) / (row + col - tp);
    ++count;
  }
  return count ? sum / count : 0.0;
}

}  // namespace cadscene::test
