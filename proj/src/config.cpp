#include "cadscene/config.hpp"

#include <fstream>
#include <set>

#include "cadscene/errors.hpp"

namespace cadscene {

namespace fs = std::filesystem;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Walks one JSON object, remembering which keys were read so leftovers can
// be reported.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!it->is_number()) throw ConfigError(join(path_, key), "expected a number");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!it->is_number_integer()) throw ConfigError(join(path_, key), "expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (it->is_number_integer() && !it->is_number_unsigned() && it->template get<long long>() < 0) {
            throw ConfigError(join(path_, key), "expected a non-negative integer");
          }
        }
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError(join(path_, key), "expected true or false");
      }
      out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(join(path_, key), e.what());
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  Section child(const std::string& key) {
    seen_.insert(key);
    return Section(j_.at(key), join(path_, key));
  }

  const Json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string key_path(const std::string& key) const { return join(path_, key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(join(path_, it.key()), "unknown key");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

// Re-raises a module's own validation error with the section's key path.
template <typename F>
void validated(const std::string& key_path, F&& check) {
  try {
    check();
  } catch (const InvalidArgument& e) {
    throw ConfigError(key_path, e.what());
  }
}

}  // namespace

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

AugmentConfig parse_augment(const Json& j, const std::string& key_path) {
  AugmentConfig c;
  Section s(j, key_path);
  s.get("scale_min", c.scale_min);
  s.get("scale_max", c.scale_max);
  s.get("rotation_min", c.rotation_min);
  s.get("rotation_max", c.rotation_max);
  s.get("crop_anchor_min", c.crop_anchor_min);
  s.get("crop_anchor_max", c.crop_anchor_max);
  s.get("crop_prob", c.crop_prob);
  s.get("overlap_voxel", c.overlap_voxel);
  s.get("overlap_keep_prob", c.overlap_keep_prob);
  s.get("floor_percentile", c.floor_percentile);
  s.get("jitter_sigma", c.jitter_sigma);
  if (s.has("scene_bounds")) {
    Section b = s.child("scene_bounds");
    b.get("x_min", c.scene_bounds.x_min);
    b.get("x_max", c.scene_bounds.x_max);
    b.get("y_min", c.scene_bounds.y_min);
    b.get("y_max", c.scene_bounds.y_max);
    b.finish();
  }
  s.finish();
  validated(key_path, [&] { c.validate(); });
  return c;
}

Json to_json(const AugmentConfig& c) {
  return Json{{"scale_min", c.scale_min},
              {"scale_max", c.scale_max},
              {"rotation_min", c.rotation_min},
              {"rotation_max", c.rotation_max},
              {"crop_anchor_min", c.crop_anchor_min},
              {"crop_anchor_max", c.crop_anchor_max},
              {"crop_prob", c.crop_prob},
              {"overlap_voxel", c.overlap_voxel},
              {"overlap_keep_prob", c.overlap_keep_prob},
              {"floor_percentile", c.floor_percentile},
              {"jitter_sigma", c.jitter_sigma},
              {"scene_bounds",
               {{"x_min", c.scene_bounds.x_min},
                {"x_max", c.scene_bounds.x_max},
                {"y_min", c.scene_bounds.y_min},
                {"y_max", c.scene_bounds.y_max}}}};
}

SimulateConfig parse_simulate_config(const Json& j) {
  SimulateConfig c;
  Section s(j, "");
  s.get("scenes", c.scenes);
  s.get("models_per_scene", c.models_per_scene);
  if (s.has("augment")) c.augment = parse_augment(s.raw("augment"), "augment");
  s.finish();
  if (c.scenes < 1) throw ConfigError("scenes", "must be >= 1");
  if (c.models_per_scene < 1) throw ConfigError("models_per_scene", "must be >= 1");
  return c;
}

Json to_json(const SimulateConfig& c) {
  return Json{{"scenes", c.scenes}, {"models_per_scene", c.models_per_scene}, {"augment", to_json(c.augment)}};
}

TrainRunConfig parse_train_config(const Json& j, const fs::path& base_dir) {
  TrainRunConfig c;
  Section s(j, "");
  s.get("seed", c.seed);
  s.get("threads", c.threads);
  if (c.threads < 1) throw ConfigError("threads", "must be >= 1");

  {
    if (!s.has("data")) throw ConfigError("data.manifest", "required");
    Section d = s.child("data");
    std::string manifest, embeddings;
    d.get("manifest", manifest);
    d.get("embeddings", embeddings);
    d.finish();
    if (manifest.empty()) throw ConfigError("data.manifest", "required");
    if (embeddings.empty()) throw ConfigError("data.embeddings", "required");
    c.manifest = resolve(base_dir, manifest);
    c.embeddings = resolve(base_dir, embeddings);
  }

  if (s.has("anchors")) {
    Section a = s.child("anchors");
    a.get("normalize", c.anchors.normalize);
    std::string mode = "average";
    a.get("multi_token", mode);
    if (mode == "average") {
      c.anchors.multi_token = MultiTokenMode::kAverage;
    } else if (mode == "concatenate") {
      c.anchors.multi_token = MultiTokenMode::kConcatenate;
    } else {
      throw ConfigError("anchors.multi_token", "expected \"average\" or \"concatenate\"");
    }
    a.finish();
  }

  if (s.has("model")) {
    Section m = s.child("model");
    m.get("widths", c.model.widths);
    m.get("voxel_size", c.model.voxel_size);
    m.get("use_dcr", c.model.use_dcr);
    m.get("prototypes", c.model.prototypes);
    m.get("attention_dim", c.model.attention_dim);
    m.get("lambda", c.model.lambda);
    m.get("temperature", c.model.temperature);
    m.finish();
    validated("model", [&] { c.model.validate(); });
  }

  if (s.has("train")) {
    Section t = s.child("train");
    t.get("epochs", c.train.epochs);
    t.get("steps_per_epoch", c.train.steps_per_epoch);
    t.get("models_per_scene", c.train.models_per_scene);
    t.get("scenes_per_step", c.train.scenes_per_step);
    if (t.has("adam")) {
      Section a = t.child("adam");
      a.get("lr", c.train.adam.learning_rate);
      a.get("beta1", c.train.adam.beta1);
      a.get("beta2", c.train.adam.beta2);
      a.get("eps", c.train.adam.epsilon);
      a.finish();
    }
    t.finish();
  }
  c.train.seed = c.seed;
  c.train.threads = c.threads;
  validated("train", [&] { c.train.validate(); });

  if (s.has("augment")) c.augment = parse_augment(s.raw("augment"), "augment");
  s.finish();
  return c;
}

TrainRunConfig load_train_config(const fs::path& path) {
  return parse_train_config(read_json(path), path.parent_path());
}

Json to_json(const TrainRunConfig& c) {
  return Json{
      {"seed", c.seed},
      {"threads", c.threads},
      {"data", {{"manifest", c.manifest.string()}, {"embeddings", c.embeddings.string()}}},
      {"anchors",
       {{"normalize", c.anchors.normalize},
        {"multi_token", c.anchors.multi_token == MultiTokenMode::kAverage ? "average" : "concatenate"}}},
      {"model",
       {{"widths", c.model.widths},
        {"voxel_size", c.model.voxel_size},
        {"use_dcr", c.model.use_dcr},
        {"prototypes", c.model.prototypes},
        {"attention_dim", c.model.attention_dim},
        {"lambda", c.model.lambda},
        {"temperature", c.model.temperature}}},
      {"train",
       {{"epochs", c.train.epochs},
        {"steps_per_epoch", c.train.steps_per_epoch},
        {"models_per_scene", c.train.models_per_scene},
        {"scenes_per_step", c.train.scenes_per_step},
        {"adam",
         {{"lr", c.train.adam.learning_rate},
          {"beta1", c.train.adam.beta1},
          {"beta2", c.train.adam.beta2},
          {"eps", c.train.adam.epsilon}}}}},
      {"augment", to_json(c.augment)}};
}

Manifest load_manifest(const fs::path& path) {
  const Json j = read_json(path);
  const fs::path base = path.parent_path();
  Manifest m;
  Section s(j, "");
  if (!s.has("classes")) throw ConfigError("classes", "required");
  const Json& classes = s.raw("classes");
  if (classes.is_string()) {
    m.class_names = read_class_list(resolve(base, classes.get<std::string>()));
  } else if (classes.is_array()) {
    for (const auto& c : classes) {
      if (!c.is_string()) throw ConfigError("classes", "expected class names");
      m.class_names.push_back(c.get<std::string>());
    }
  } else {
    throw ConfigError("classes", "expected a class-list path or an array of names");
  }
  s.get("points_per_model", m.points_per_model);
  if (m.points_per_model < 1) throw ConfigError("points_per_model", "must be >= 1");

  if (!s.has("models")) throw ConfigError("models", "required");
  const Json& models = s.raw("models");
  if (!models.is_array()) throw ConfigError("models", "expected an array");
  for (std::size_t i = 0; i < models.size(); ++i) {
    const std::string key = "models[" + std::to_string(i) + "]";
    Section e(models[i], key);
    std::string mesh, cls;
    e.get("mesh", mesh);
    e.get("class", cls);
    e.finish();
    if (mesh.empty()) throw ConfigError(key + ".mesh", "required");
    auto it = std::find(m.class_names.begin(), m.class_names.end(), cls);
    if (it == m.class_names.end()) throw ConfigError(key + ".class", "unknown class '" + cls + "'");
    m.models.push_back({resolve(base, mesh), static_cast<int>(it - m.class_names.begin())});
  }
  if (s.has("backgrounds")) {
    const Json& bg = s.raw("backgrounds");
    if (!bg.is_array()) throw ConfigError("backgrounds", "expected an array of paths");
    for (const auto& b : bg) {
      if (!b.is_string()) throw ConfigError("backgrounds", "expected an array of paths");
      m.backgrounds.push_back(resolve(base, b.get<std::string>()));
    }
  }
  s.finish();
  return m;
}

std::vector<LabeledModel> sample_manifest(const Manifest& manifest, Rng& rng) {
  std::vector<LabeledModel> out;
  for (const auto& e : manifest.models) {
    out.push_back({poisson_disk_sample(load_mesh(e.mesh), manifest.points_per_model, rng), e.class_id});
  }
  return out;
}

std::vector<PointCloud> load_backgrounds(const Manifest& manifest) {
  std::vector<PointCloud> out;
  for (const auto& p : manifest.backgrounds) out.push_back(read_points(p));
  return out;
}

}  // namespace cadscene
