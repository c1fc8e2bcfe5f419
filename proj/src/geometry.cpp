#include "cadscene/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <queue>
#include <sstream>
#include <unordered_map>

#include "cadscene/errors.hpp"
#include "cadscene/voxel_key.hpp"

namespace cadscene {

namespace {

template <typename T>
void check_length(const std::optional<std::vector<T>>& field, std::size_t n, const char* name) {
  if (field && field->size() != n) {
    throw InvalidArgument(std::string("point cloud: ") + name + " has " +
                          std::to_string(field->size()) + " entries for " + std::to_string(n) +
                          " points");
  }
}

template <typename T>
void select_into(const std::optional<std::vector<T>>& src, const std::vector<bool>& keep,
                 std::optional<std::vector<T>>& dst) {
  if (!src) return;
  dst.emplace();
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) dst->push_back((*src)[i]);
  }
}

template <typename T>
void append_field(std::optional<std::vector<T>>& dst, const std::optional<std::vector<T>>& src,
                  bool dst_was_empty, const char* name) {
  if (dst_was_empty && !dst) {
    dst = src;
    return;
  }
  if (dst.has_value() != src.has_value()) {
    throw InvalidArgument(std::string("point cloud append: mismatched ") + name + " annotation");
  }
  if (src) dst->insert(dst->end(), src->begin(), src->end());
}

// Reads the next non-empty, non-comment line. Returns false at EOF.
bool next_content_line(std::istream& in, std::string& line, std::size_t& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    return true;
  }
  return false;
}

}  // namespace

void PointCloud::validate() const {
  for (const auto& p : positions) {
    if (!p.allFinite()) throw InvalidArgument("point cloud: non-finite coordinate");
  }
  check_length(labels, size(), "labels");
  check_length(instance_ids, size(), "instance_ids");
  check_length(sources, size(), "sources");
}

PointCloud PointCloud::select(const std::vector<bool>& keep) const {
  if (keep.size() != size()) throw DimensionError("select: mask length differs from cloud size");
  PointCloud out;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) out.positions.push_back(positions[i]);
  }
  select_into(labels, keep, out.labels);
  select_into(instance_ids, keep, out.instance_ids);
  select_into(sources, keep, out.sources);
  return out;
}

void PointCloud::append(const PointCloud& other) {
  const bool was_empty = empty();
  if (was_empty && other.empty()) return;
  if (!was_empty && other.empty()) return;
  positions.insert(positions.end(), other.positions.begin(), other.positions.end());
  append_field(labels, other.labels, was_empty, "labels");
  append_field(instance_ids, other.instance_ids, was_empty, "instance_ids");
  append_field(sources, other.sources, was_empty, "sources");
}

TriangleMesh parse_off(std::istream& in, const std::string& source_name) {
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError(source_name, line_no, what);
  };

  if (!next_content_line(in, line, line_no)) throw fail("empty file, expected OFF header");
  std::istringstream header(line);
  std::string magic;
  header >> std::setw(3) >> magic;
  if (magic != "OFF") throw fail("expected OFF header");

  // Some distributions glue the counts onto the header line ("OFF490 518 0").
  long long nv = -1, nf = -1, ne = 0;
  if (!(header >> nv)) {
    if (!next_content_line(in, line, line_no)) throw fail("missing counts line");
    std::istringstream counts(line);
    if (!(counts >> nv >> nf)) throw fail("malformed counts line");
    counts >> ne;
  } else if (!(header >> nf)) {
    throw fail("malformed counts on header line");
  }
  if (nv < 0 || nf < 0) throw fail("negative element count");

  TriangleMesh mesh;
  mesh.vertices.reserve(static_cast<std::size_t>(nv));
  for (long long i = 0; i < nv; ++i) {
    if (!next_content_line(in, line, line_no)) throw fail("unexpected end of file in vertices");
    std::istringstream ss(line);
    double x, y, z;
    if (!(ss >> x >> y >> z)) throw fail("malformed vertex");
    Vec3 v(x, y, z);
    if (!v.allFinite()) throw fail("non-finite vertex");
    mesh.vertices.push_back(v);
  }

  mesh.faces.reserve(static_cast<std::size_t>(nf));
  for (long long i = 0; i < nf; ++i) {
    if (!next_content_line(in, line, line_no)) throw fail("unexpected end of file in faces");
    std::istringstream ss(line);
    int count = 0;
    if (!(ss >> count)) throw fail("malformed face");
    if (count != 3) throw fail("only triangular faces are supported, got " + std::to_string(count));
    std::array<int, 3> face{};
    for (int& idx : face) {
      long long raw;
      if (!(ss >> raw)) throw fail("malformed face");
      if (raw < 0 || raw >= nv) {
        throw fail("face index " + std::to_string(raw) + " out of range for " +
                   std::to_string(nv) + " vertices");
      }
      idx = static_cast<int>(raw);
    }
    const double area =
        triangle_area(mesh.vertices[face[0]], mesh.vertices[face[1]], mesh.vertices[face[2]]);
    if (area > kDegenerateFaceArea) mesh.faces.push_back(face);
  }
  if (mesh.faces.empty()) throw fail("mesh has no non-degenerate faces");
  return mesh;
}

TriangleMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file " + path.string());
  return parse_off(in, path.string());
}

void write_off(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write mesh file " + path.string());
  out << "OFF\n" << mesh.vertices.size() << ' ' << mesh.faces.size() << " 0\n";
  out << std::setprecision(17);
  for (const auto& v : mesh.vertices) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

double surface_area(const TriangleMesh& mesh) {
  double total = 0.0;
  for (const auto& f : mesh.faces) {
    total += triangle_area(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
  }
  return total;
}

PointCloud area_weighted_sample(const TriangleMesh& mesh, std::size_t m, Rng& rng) {
  if (mesh.faces.empty()) throw InvalidArgument("area_weighted_sample: empty mesh");
  if (m == 0) throw InvalidArgument("area_weighted_sample: m must be at least 1");

  std::vector<double> cumulative;
  cumulative.reserve(mesh.faces.size());
  double running = 0.0;
  for (const auto& f : mesh.faces) {
    running += triangle_area(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
    cumulative.push_back(running);
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PointCloud out;
  out.positions.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double pick = unit(rng) * running;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const auto& f = mesh.faces[static_cast<std::size_t>(it - cumulative.begin())];
    const double r1 = std::sqrt(unit(rng));
    const double r2 = unit(rng);
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    out.positions.push_back((1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c);
  }
  return out;
}

double poisson_max_radius(double area, std::size_t n) {
  return std::sqrt(area / (2.0 * std::sqrt(3.0) * static_cast<double>(n)));
}

PointCloud poisson_disk_sample(const TriangleMesh& mesh, std::size_t n, Rng& rng,
                               const PoissonOptions& options) {
  if (mesh.faces.empty()) throw InvalidArgument("poisson_disk_sample: empty mesh");
  if (n == 0) throw InvalidArgument("poisson_disk_sample: n must be at least 1");
  if (options.oversample <= 1.0) {
    throw InvalidArgument("poisson_disk_sample: oversample factor must exceed 1");
  }

  const auto pool_size =
      static_cast<std::size_t>(std::ceil(options.oversample * static_cast<double>(n)));
  const PointCloud pool = area_weighted_sample(mesh, pool_size, rng);
  const auto& pts = pool.positions;

  const double reach = 2.0 * poisson_max_radius(surface_area(mesh), n);

  std::unordered_map<VoxelKey, std::vector<std::size_t>, VoxelKeyHash> grid;
  for (std::size_t i = 0; i < pts.size(); ++i) grid[voxel_of(pts[i], reach)].push_back(i);

  // Neighbour lists with their pairwise weights, computed once.
  std::vector<std::vector<std::pair<std::size_t, double>>> neighbours(pts.size());
  std::vector<double> weight(pts.size(), 0.0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const VoxelKey home = voxel_of(pts[i], reach);
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = grid.find(home.offset(dx, dy, dz));
          if (it == grid.end()) continue;
          for (std::size_t j : it->second) {
            if (j == i) continue;
            const double d = (pts[i] - pts[j]).norm();
            if (d >= reach) continue;
            const double w = std::pow(1.0 - d / reach, options.weight_exponent);
            neighbours[i].emplace_back(j, w);
            weight[i] += w;
          }
        }
      }
    }
  }

  // Lazy max-heap: stale entries are skipped when their weight no longer
  // matches. Ties resolve towards the larger index.
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry> heap;
  for (std::size_t i = 0; i < pts.size(); ++i) heap.emplace(weight[i], i);

  std::vector<bool> alive(pts.size(), true);
  std::size_t remaining = pts.size();
  while (remaining > n) {
    const auto [w, i] = heap.top();
    heap.pop();
    if (!alive[i] || w != weight[i]) continue;
    alive[i] = false;
    --remaining;
    for (const auto& [j, wij] : neighbours[i]) {
      if (!alive[j]) continue;
      weight[j] -= wij;
      heap.emplace(weight[j], j);
    }
  }
  return pool.select(alive);
}

Vec3 centroid(const PointCloud& pc) {
  if (pc.empty()) throw InvalidArgument("centroid: empty cloud");
  Vec3 sum = Vec3::Zero();
  for (const auto& p : pc.positions) sum += p;
  return sum / static_cast<double>(pc.size());
}

PointCloud rotate_z(const PointCloud& pc, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  PointCloud out = pc;
  for (auto& p : out.positions) {
    const double x = p.x();
    const double y = p.y();
    p.x() = c * x - s * y;
    p.y() = s * x + c * y;
  }
  return out;
}

PointCloud scale(const PointCloud& pc, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw InvalidArgument("scale: factor must be positive and finite");
  }
  PointCloud out = pc;
  if (pc.empty() || factor == 1.0) return out;
  const Vec3 center = centroid(pc);
  for (auto& p : out.positions) p = center + factor * (p - center);
  return out;
}

PointCloud translate(const PointCloud& pc, const Vec3& offset) {
  PointCloud out = pc;
  for (auto& p : out.positions) p += offset;
  return out;
}

std::pair<Vec3, Vec3> bounding_box(const PointCloud& pc) {
  if (pc.empty()) throw InvalidArgument("bounding_box: empty cloud");
  Vec3 lo = pc.positions.front();
  Vec3 hi = lo;
  for (const auto& p : pc.positions) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return {lo, hi};
}

PointCloud read_points(std::istream& in, const std::string& source_name) {
  PointCloud pc;
  std::vector<int> labels;
  int columns = 0;
  std::string line;
  std::size_t line_no = 0;
  while (next_content_line(in, line, line_no)) {
    std::istringstream ss(line);
    double x, y, z;
    if (!(ss >> x >> y >> z)) throw ParseError(source_name, line_no, "expected x y z");
    int cols = 3;
    long long label = 0;
    if (ss >> label) cols = 4;
    std::string extra;
    if (ss >> extra) throw ParseError(source_name, line_no, "too many columns");
    if (cols == 4 && (label < std::numeric_limits<int>::min() ||
                      label > std::numeric_limits<int>::max())) {
      throw ParseError(source_name, line_no, "label out of range");
    }
    if (columns == 0) columns = cols;
    if (cols != columns) throw ParseError(source_name, line_no, "inconsistent column count");
    Vec3 p(x, y, z);
    if (!p.allFinite()) throw ParseError(source_name, line_no, "non-finite coordinate");
    pc.positions.push_back(p);
    if (cols == 4) labels.push_back(static_cast<int>(label));
  }
  if (columns == 4) pc.labels = std::move(labels);
  return pc;
}

PointCloud read_points(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open point file " + path.string());
  return read_points(in, path.string());
}

void write_points(std::ostream& out, const PointCloud& pc) {
  out << std::setprecision(17);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const auto& p = pc.positions[i];
    out << p.x() << ' ' << p.y() << ' ' << p.z();
    if (pc.labels) out << ' ' << (*pc.labels)[i];
    out << '\n';
  }
}

void write_points(const std::filesystem::path& path, const PointCloud& pc) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write point file " + path.string());
  write_points(out, pc);
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace cadscene
