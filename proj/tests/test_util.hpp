#pragma once

// Brute-force helpers shared by the test binaries. Nothing here calls into
// the code under test beyond plain data types.

#include <algorithm>
#include <limits>
#include <random>
#include <vector>

#include "cadscene/geometry.hpp"

namespace cadscene::test {

inline PointCloud random_cloud(Rng& rng, std::size_t n, double extent) {
  std::uniform_real_distribution<double> u(-extent, extent);
  PointCloud pc;
  for (std::size_t i = 0; i < n; ++i) pc.positions.emplace_back(u(rng), u(rng), u(rng));
  return pc;
}

inline std::vector<double> pairwise_distances(const PointCloud& pc) {
  std::vector<double> d;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    for (std::size_t j = i + 1; j < pc.size(); ++j) {
      d.push_back((pc.positions[i] - pc.positions[j]).norm());
    }
  }
  return d;
}

inline double min_pairwise_distance(const PointCloud& pc) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pc.size(); ++i) {
    for (std::size_t j = i + 1; j < pc.size(); ++j) {
      best = std::min(best, (pc.positions[i] - pc.positions[j]).norm());
    }
  }
  return best;
}

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

}  // namespace cadscene::test
