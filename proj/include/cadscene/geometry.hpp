#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cadscene/linalg.hpp"

namespace cadscene {

/// Every stochastic operation takes the caller's generator by reference.
/// Generators are never shared across threads.
using Rng = std::mt19937_64;

/// Label carried by real-scan points mixed into a scene. Such points have no
/// anchor and never contribute a loss term.
inline constexpr int kBackgroundLabel = -1;
inline constexpr int kNoInstance = -1;

enum class PointSource : std::uint8_t { kModel = 0, kBackground = 1 };

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
};

/// Positions in meters plus optional per-point annotations. When present,
/// every annotation array has one entry per position.
struct PointCloud {
  std::vector<Vec3> positions;
  std::optional<std::vector<int>> labels;
  std::optional<std::vector<int>> instance_ids;
  std::optional<std::vector<PointSource>> sources;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }

  /// Throws InvalidArgument when a coordinate is non-finite or an annotation
  /// array has the wrong length.
  void validate() const;

  /// Copy of the points whose `keep` flag is set, annotations included.
  PointCloud select(const std::vector<bool>& keep) const;

  /// Appends `other`. Annotation arrays present on either side must be
  /// present on both unless this cloud is empty.
  void append(const PointCloud& other);
};

inline constexpr double kDegenerateFaceArea = 1e-12;

/// Parses ASCII OFF. Degenerate faces (area <= 1e-12) are dropped; vertex
/// order is preserved.
TriangleMesh parse_off(std::istream& in, const std::string& source_name = "<stream>");
TriangleMesh load_mesh(const std::filesystem::path& path);
void write_off(const std::filesystem::path& path, const TriangleMesh& mesh);

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);
double surface_area(const TriangleMesh& mesh);

/// Draws `m` points: triangle chosen proportionally to area, then a uniform
/// barycentric position inside it.
PointCloud area_weighted_sample(const TriangleMesh& mesh, std::size_t m, Rng& rng);

struct PoissonOptions {
  double oversample = 4.0;   // candidate pool is ceil(oversample * n)
  double weight_exponent = 8.0;
};

/// Maximum Poisson-disk radius for `n` samples on a surface of area `area`:
/// sqrt(area / (2 * sqrt(3) * n)).
double poisson_max_radius(double area, std::size_t n);

/// Weighted sample elimination. Oversamples the surface, weights each
/// candidate by sum_j (1 - d_ij / (2 r_max))^exponent over neighbours closer
/// than 2 r_max, and repeatedly removes the heaviest candidate until exactly
/// `n` remain. Survivors keep their oversampling order.
PointCloud poisson_disk_sample(const TriangleMesh& mesh, std::size_t n, Rng& rng,
                               const PoissonOptions& options = {});

Vec3 centroid(const PointCloud& pc);
PointCloud rotate_z(const PointCloud& pc, double angle);
/// Uniform scaling about the cloud centroid. Throws for factor <= 0.
PointCloud scale(const PointCloud& pc, double factor);
PointCloud translate(const PointCloud& pc, const Vec3& offset);

/// Axis-aligned bounds of the positions. Requires a nonempty cloud.
std::pair<Vec3, Vec3> bounding_box(const PointCloud& pc);

/// Point text format: one "x y z" or "x y z label" line per point. Lines
/// starting with '#' are comments. All lines must agree on the column count.
PointCloud read_points(std::istream& in, const std::string& source_name = "<stream>");
PointCloud read_points(const std::filesystem::path& path);
/// Writes labels when the cloud has them. Coordinates use round-trip precision.
void write_points(std::ostream& out, const PointCloud& pc);
void write_points(const std::filesystem::path& path, const PointCloud& pc);

}  // namespace cadscene
