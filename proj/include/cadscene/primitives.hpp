#pragma once

#include "cadscene/geometry.hpp"

namespace cadscene {

/// Icosahedron refined `subdivisions` times and projected onto the sphere.
/// Level 3 gives 1280 faces.
TriangleMesh make_icosphere(int subdivisions, double radius = 1.0);

/// Axis-aligned box with one corner at the origin, 12 triangles.
TriangleMesh make_box(double sx, double sy, double sz);

/// Closed cylinder along +z with its base centred on the origin.
TriangleMesh make_cylinder(double radius, double height, int segments);

/// Unit square [0,1]^2 at z = 0 split into 2 triangles.
TriangleMesh make_unit_square();

}  // namespace cadscene
