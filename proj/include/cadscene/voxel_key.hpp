#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>

#include "cadscene/linalg.hpp"

namespace cadscene {

/// Integer lattice cell. Used for sparse voxels and for spatial hashing.
struct VoxelKey {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t z = 0;

  friend bool operator==(const VoxelKey&, const VoxelKey&) = default;
  friend auto operator<=>(const VoxelKey&, const VoxelKey&) = default;

  VoxelKey offset(int dx, int dy, int dz) const { return {x + dx, y + dy, z + dz}; }
};

inline VoxelKey voxel_of(const Vec3& p, double cell) {
  return {static_cast<std::int32_t>(std::floor(p.x() / cell)),
          static_cast<std::int32_t>(std::floor(p.y() / cell)),
          static_cast<std::int32_t>(std::floor(p.z() / cell))};
}

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint32_t>(k.x);
    h = h * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint32_t>(k.y);
    h = h * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint32_t>(k.z);
    h ^= h >> 29;
    return static_cast<std::size_t>(h * 0xBF58476D1CE4E5B9ull);
  }
};

}  // namespace cadscene
