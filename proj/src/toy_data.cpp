#include "cadscene/toy_data.hpp"

#include <fstream>
#include <iomanip>

#include "cadscene/config.hpp"
#include "cadscene/errors.hpp"
#include "cadscene/primitives.hpp"

namespace cadscene {

namespace fs = std::filesystem;

namespace {

constexpr int kUnseenClassId = 3;

TriangleMesh centred(TriangleMesh mesh) {
  Vec3 lo = mesh.vertices.front(), hi = lo;
  for (const auto& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const Vec3 c = 0.5 * (lo + hi);
  for (auto& v : mesh.vertices) v -= c;
  return mesh;
}

ToyMesh sphere(const std::string& name, double r) {
  return {name, 0, make_icosphere(3, r)};
}
ToyMesh box(const std::string& name, double x, double y, double z) {
  return {name, 1, centred(make_box(x, y, z))};
}
ToyMesh cylinder(const std::string& name, double r, double h) {
  return {name, 2, centred(make_cylinder(r, h, 24))};
}

void write_manifest(const fs::path& path, const std::vector<ToyMesh>& meshes,
                    const std::vector<std::string>& classes, std::size_t points) {
  Json models = Json::array();
  for (const auto& m : meshes) {
    models.push_back({{"mesh", "meshes/" + m.name + ".off"},
                      {"class", classes[static_cast<std::size_t>(m.class_id)]}});
  }
  Json j{{"classes", classes}, {"points_per_model", points}, {"models", models}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace

ToyMeshes toy_meshes() {
  ToyMeshes t;
  t.train = {sphere("sphere_0", 0.14),          sphere("sphere_1", 0.16),
             sphere("sphere_2", 0.18),          box("box_0", 0.36, 0.26, 0.20),
             box("box_1", 0.40, 0.24, 0.18),    box("box_2", 0.32, 0.30, 0.22),
             cylinder("cylinder_0", 0.07, 0.50), cylinder("cylinder_1", 0.06, 0.55),
             cylinder("cylinder_2", 0.08, 0.45)};
  t.heldout = {sphere("sphere_h0", 0.15),          sphere("sphere_h1", 0.17),
               box("box_h0", 0.38, 0.28, 0.19),    box("box_h1", 0.34, 0.25, 0.21),
               cylinder("cylinder_h0", 0.065, 0.52), cylinder("cylinder_h1", 0.075, 0.48)};
  ToyMesh ball = sphere("ball_0", 0.155);
  ball.class_id = kUnseenClassId;
  t.unseen = {ball};
  return t;
}

ToyEmbeddings toy_embeddings(int dim, std::uint64_t seed) {
  ToyEmbeddings e;
  e.tokens = {"sphere", "box", "cylinder", "ball", "chair", "table", "lamp", "night", "stand"};
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  e.vectors.resize(static_cast<Eigen::Index>(e.tokens.size()), dim);
  for (Eigen::Index i = 0; i < e.vectors.rows(); ++i) {
    for (Eigen::Index d = 0; d < dim; ++d) e.vectors(i, d) = gauss(rng);
    e.vectors.row(i) /= std::sqrt(static_cast<double>(dim));
  }
  // "ball" is a small perturbation of "sphere".
  e.vectors.row(3) = e.vectors.row(0) + 0.1 * e.vectors.row(3);
  return e;
}

std::vector<LabeledModel> sample_models(const std::vector<ToyMesh>& meshes, std::size_t points,
                                        Rng& rng) {
  std::vector<LabeledModel> out;
  for (const auto& m : meshes) out.push_back({poisson_disk_sample(m.mesh, points, rng), m.class_id});
  return out;
}

AugmentConfig toy_augment() {
  AugmentConfig a;
  a.scene_bounds = {-1.0, 1.0, -1.0, 1.0};
  return a;
}

void write_toy_dataset(const fs::path& dir, std::uint64_t seed) {
  fs::create_directories(dir / "meshes");
  const ToyMeshes meshes = toy_meshes();
  for (const auto* group : {&meshes.train, &meshes.heldout, &meshes.unseen}) {
    for (const auto& m : *group) write_off(dir / "meshes" / (m.name + ".off"), m.mesh);
  }

  std::vector<std::string> classes = kToyClasses;
  {
    std::ofstream out(dir / "classes.txt");
    for (const auto& c : classes) out << c << "\n";
  }
  {
    const ToyEmbeddings e = toy_embeddings(24, seed);
    std::ofstream out(dir / "embeddings.txt");
    if (!out) throw IoError("cannot write embeddings under " + dir.string());
    out << std::setprecision(6) << std::fixed;
    for (std::size_t i = 0; i < e.tokens.size(); ++i) {
      out << e.tokens[i];
      for (Eigen::Index d = 0; d < e.vectors.cols(); ++d) out << ' ' << e.vectors(static_cast<Eigen::Index>(i), d);
      out << "\n";
    }
  }

  const std::size_t points = 512;
  write_manifest(dir / "manifest_train.json", meshes.train, classes, points);
  write_manifest(dir / "manifest_heldout.json", meshes.heldout, classes, points);
  std::vector<std::string> with_unseen = classes;
  with_unseen.push_back(kToyUnseenClass);
  std::vector<ToyMesh> unseen_scene = meshes.heldout;
  unseen_scene.insert(unseen_scene.end(), meshes.unseen.begin(), meshes.unseen.end());
  write_manifest(dir / "manifest_unseen.json", unseen_scene, with_unseen, points);

  TrainRunConfig cfg;
  cfg.manifest = "manifest_train.json";
  cfg.embeddings = "embeddings.txt";
  cfg.augment = toy_augment();
  cfg.train.epochs = 30;
  cfg.train.steps_per_epoch = 32;
  std::ofstream out(dir / "train.json");
  out << to_json(cfg).dump(2) << "\n";
}

}  // namespace cadscene
