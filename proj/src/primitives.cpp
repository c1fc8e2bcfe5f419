#include "cadscene/primitives.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include "cadscene/errors.hpp"

namespace cadscene {

TriangleMesh make_icosphere(int subdivisions, double radius) {
  if (subdivisions < 0) throw InvalidArgument("make_icosphere: negative subdivision level");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriangleMesh mesh;
  mesh.vertices = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                   {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : mesh.vertices) v.normalize();
  mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      mesh.vertices.push_back((mesh.vertices[a] + mesh.vertices[b]).normalized());
      const int idx = static_cast<int>(mesh.vertices.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> refined;
    refined.reserve(mesh.faces.size() * 4);
    for (const auto& f : mesh.faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      refined.push_back({f[0], ab, ca});
      refined.push_back({f[1], bc, ab});
      refined.push_back({f[2], ca, bc});
      refined.push_back({ab, bc, ca});
    }
    mesh.faces = std::move(refined);
  }
  for (auto& v : mesh.vertices) v *= radius;
  return mesh;
}

TriangleMesh make_box(double sx, double sy, double sz) {
  if (!(sx > 0 && sy > 0 && sz > 0)) throw InvalidArgument("make_box: sizes must be positive");
  TriangleMesh mesh;
  for (int i = 0; i < 8; ++i) {
    mesh.vertices.emplace_back((i & 1) ? sx : 0.0, (i & 2) ? sy : 0.0, (i & 4) ? sz : 0.0);
  }
  mesh.faces = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6},   // z = 0, z = sz
                {0, 1, 4}, {1, 5, 4}, {2, 6, 3}, {3, 6, 7},   // y = 0, y = sy
                {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};  // x = 0, x = sx
  return mesh;
}

TriangleMesh make_cylinder(double radius, double height, int segments) {
  if (!(radius > 0 && height > 0) || segments < 3) {
    throw InvalidArgument("make_cylinder: need positive size and at least 3 segments");
  }
  TriangleMesh mesh;
  for (int ring = 0; ring < 2; ++ring) {
    for (int s = 0; s < segments; ++s) {
      const double a = 2.0 * std::numbers::pi * s / segments;
      mesh.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), ring * height);
    }
  }
  const int bottom = static_cast<int>(mesh.vertices.size());
  mesh.vertices.emplace_back(0.0, 0.0, 0.0);
  const int top = bottom + 1;
  mesh.vertices.emplace_back(0.0, 0.0, height);
  for (int s = 0; s < segments; ++s) {
    const int n = (s + 1) % segments;
    mesh.faces.push_back({s, n, segments + s});
    mesh.faces.push_back({n, segments + n, segments + s});
    mesh.faces.push_back({bottom, n, s});
    mesh.faces.push_back({top, segments + s, segments + n});
  }
  return mesh;
}

TriangleMesh make_unit_square() {
  TriangleMesh mesh;
  mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  mesh.faces = {{0, 1, 2}, {0, 2, 3}};
  return mesh;
}

}  // namespace cadscene
