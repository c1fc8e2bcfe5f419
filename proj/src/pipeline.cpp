#include "cadscene/pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "cadscene/errors.hpp"

namespace cadscene {

namespace fs = std::filesystem;

Rng sampling_rng(std::uint64_t seed) {
  return derive_rng(seed, std::numeric_limits<std::uint32_t>::max(), 0, 0);
}

TrainingInputs load_training_inputs(const TrainRunConfig& config) {
  const Manifest manifest = load_manifest(config.manifest);
  Rng rng = sampling_rng(config.seed);
  TrainingInputs in;
  in.data.models = sample_manifest(manifest, rng);
  in.data.backgrounds = load_backgrounds(manifest);
  in.data.augment = config.augment;
  in.table = load_embeddings(config.embeddings, manifest.class_names, config.anchors);
  return in;
}

TrainResult run_training(const TrainRunConfig& config, const EpochCallback& on_epoch) {
  const TrainingInputs in = load_training_inputs(config);
  return train(in.data, in.table, config.model, config.train, on_epoch);
}

std::vector<SimulatedScene> simulate_scenes(const std::vector<LabeledModel>& models,
                                            const std::vector<PointCloud>& backgrounds,
                                            const SimulateConfig& config, std::uint64_t seed) {
  TrainData data{models, backgrounds, config.augment};
  std::vector<SimulatedScene> scenes;
  for (int s = 0; s < config.scenes; ++s) {
    Rng rng = derive_rng(seed, 0, static_cast<std::uint64_t>(s), 0);
    scenes.push_back(draw_scene(data, config.models_per_scene, rng));
  }
  return scenes;
}

EvalReport evaluate_scenes(const std::vector<SimulatedScene>& scenes, const Checkpoint& checkpoint,
                           const AnchorTable& table, ApPooling pooling) {
  std::vector<Matrix> probs;
  std::vector<std::vector<int>> gt;
  for (const auto& s : scenes) {
    if (!s.cloud.labels) throw InvalidArgument("evaluate_scenes: scene without labels");
    probs.push_back(infer_scene(s.cloud, checkpoint, table));
    gt.push_back(*s.cloud.labels);
  }
  std::vector<int> classes(table.class_count());
  std::iota(classes.begin(), classes.end(), 0);
  return evaluate_salient(probs, gt, classes, pooling, table.class_names());
}

void write_probabilities(const fs::path& path, const Matrix& probs,
                         const std::vector<std::string>& class_names) {
  if (static_cast<std::size_t>(probs.cols()) != class_names.size()) {
    throw DimensionError("write_probabilities: one class name per column required");
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# classes";
  for (const auto& c : class_names) out << '\t' << c;
  out << '\n' << std::setprecision(17);
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    for (Eigen::Index c = 0; c < probs.cols(); ++c) out << (c ? " " : "") << probs(i, c);
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Matrix read_probabilities(const fs::path& path, std::vector<std::string>* class_names) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line.rfind("# classes", 0) != 0) {
    throw ParseError(path.string(), 1, "expected a '# classes' header");
  }
  std::vector<std::string> names;
  {
    std::istringstream header(line.substr(9));
    std::string name;
    while (std::getline(header, name, '\t')) {
      if (!name.empty()) names.push_back(name);
    }
  }
  if (names.empty()) throw ParseError(path.string(), 1, "no class names in header");
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::size_t cols = 0;
    double v;
    while (ss >> v) {
      values.push_back(v);
      ++cols;
    }
    if (!ss.eof() || cols != names.size()) {
      throw ParseError(path.string(), line_no,
                       "expected " + std::to_string(names.size()) + " probabilities");
    }
    ++rows;
  }
  Matrix probs(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(names.size()));
  std::copy(values.begin(), values.end(), probs.data());
  if (class_names) *class_names = std::move(names);
  return probs;
}

Json scene_sidecar(const SimulatedScene& scene, const std::vector<std::string>& class_names) {
  auto name = [&](int c) -> Json {
    if (c >= 0 && static_cast<std::size_t>(c) < class_names.size()) return class_names[static_cast<std::size_t>(c)];
    return nullptr;
  };
  Json instances = Json::array();
  for (const auto& r : scene.instances) {
    instances.push_back({{"instance_id", r.instance_id},
                         {"class_id", r.class_id},
                         {"class", name(r.class_id)},
                         {"source", r.source == PointSource::kModel ? "model" : "background"},
                         {"begin", r.begin},
                         {"end", r.end}});
  }
  Json classes = Json::array();
  for (int c : scene.class_set) classes.push_back(name(c));
  return Json{{"points", scene.cloud.size()}, {"classes", classes}, {"instances", instances}};
}

}  // namespace cadscene
