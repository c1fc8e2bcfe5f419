// cadscene: command-line front end.
//
//   cadscene make-toy  --out DIR
//   cadscene sample    --mesh M.off --n 2048 --seed 0 --out DIR
//   cadscene simulate  --manifest M.json [--config sim.json] --seed 0 --out DIR
//   cadscene train     --config train.json [--seed S] [--threads T] --out DIR
//   cadscene infer     --checkpoint C --embeddings E --scene S.txt... [--extra-class NAME] --out DIR
//   cadscene eval      --probs P... --gt S.txt... --out DIR
//   cadscene gradcheck [--seed S] [--trials N]
//
// Every command writes into its --out directory and drops the resolved
// configuration there as <command>.config.json.
#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "cadscene/checkpoint.hpp"
#include "cadscene/config.hpp"
#include "cadscene/errors.hpp"
#include "cadscene/gradcheck.hpp"
#include "cadscene/pipeline.hpp"
#include "cadscene/toy_data.hpp"

using namespace cadscene;
namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kIo = 3, kDivergence = 4 };

void save_resolved(const fs::path& dir, const std::string& command, const Json& resolved) {
  fs::create_directories(dir);
  const fs::path path = dir / (command + ".config.json");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << resolved.dump(2) << '\n';
  std::cerr << "[" << command << "] resolved config:\n" << resolved.dump(2) << '\n';
}

std::string stem_with_index(const std::string& prefix, int i) {
  std::ostringstream s;
  s << prefix << '_' << std::setw(3) << std::setfill('0') << i;
  return s.str();
}

struct SampleArgs {
  std::string mesh;
  std::size_t n = 2048;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_sample(const SampleArgs& a) {
  save_resolved(a.out, "sample", Json{{"mesh", fs::absolute(a.mesh).string()}, {"n", a.n}, {"seed", a.seed}});
  const TriangleMesh mesh = load_mesh(a.mesh);
  Rng rng(a.seed);
  write_points(fs::path(a.out) / "points.txt", poisson_disk_sample(mesh, a.n, rng));
  return kOk;
}

struct SimulateArgs {
  std::string manifest;
  std::string config;
  std::optional<int> scenes;
  std::optional<int> models_per_scene;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
  SimulateConfig cfg = a.config.empty() ? SimulateConfig{} : parse_simulate_config(read_json(a.config));
  if (a.scenes) cfg.scenes = *a.scenes;
  if (a.models_per_scene) cfg.models_per_scene = *a.models_per_scene;
  if (cfg.scenes < 1) throw ConfigError("scenes", "must be >= 1");
  if (cfg.models_per_scene < 1) throw ConfigError("models_per_scene", "must be >= 1");
  Json resolved = to_json(cfg);
  resolved["manifest"] = fs::absolute(a.manifest).string();
  resolved["seed"] = a.seed;
  save_resolved(a.out, "simulate", resolved);

  const Manifest manifest = load_manifest(a.manifest);
  Rng rng = sampling_rng(a.seed);
  const auto models = sample_manifest(manifest, rng);
  const auto scenes = simulate_scenes(models, load_backgrounds(manifest), cfg, a.seed);
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const std::string stem = stem_with_index("scene", static_cast<int>(s));
    write_points(fs::path(a.out) / (stem + ".txt"), scenes[s].cloud);
    std::ofstream side(fs::path(a.out) / (stem + ".json"));
    side << scene_sidecar(scenes[s], manifest.class_names).dump(2) << '\n';
  }
  std::cerr << "[simulate] wrote " << scenes.size() << " scenes to " << a.out << '\n';
  return kOk;
}

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> epochs;
  std::string out;
};

int cmd_train(const TrainArgs& a) {
  Json j = read_json(a.config);
  if (a.seed) j["seed"] = *a.seed;
  if (a.threads) j["threads"] = *a.threads;
  if (a.epochs) j["train"]["epochs"] = *a.epochs;
  const TrainRunConfig cfg = parse_train_config(j, fs::path(a.config).parent_path());
  save_resolved(a.out, "train", to_json(cfg));

  std::ofstream log(fs::path(a.out) / "loss.log");
  log << "# epoch loss wall_seconds\n" << std::setprecision(10);
  const TrainResult r = run_training(cfg, [&](const EpochRecord& rec) {
    log << rec.epoch << ' ' << rec.loss << ' ' << rec.wall_seconds << std::endl;
    std::ostringstream line;
    line << "[train] epoch " << rec.epoch << " loss " << std::setprecision(6) << rec.loss << " ("
         << std::fixed << std::setprecision(2) << rec.wall_seconds << "s)";
    std::cerr << line.str() << '\n';
    return true;
  });
  save_checkpoint(fs::path(a.out) / "checkpoint.bin", r.checkpoint);
  std::cerr << "[train] initial loss " << r.initial_loss;
  if (!r.log.empty()) std::cerr << ", final epoch loss " << r.log.back().loss;
  std::cerr << '\n';
  return kOk;
}

struct InferArgs {
  std::string checkpoint;
  std::string embeddings;
  std::vector<std::string> scenes;
  std::vector<std::string> extra_classes;
  std::string out;
};

int cmd_infer(const InferArgs& a) {
  Json scene_list = Json::array();
  for (const auto& s : a.scenes) scene_list.push_back(fs::absolute(s).string());
  save_resolved(a.out, "infer",
                Json{{"checkpoint", fs::absolute(a.checkpoint).string()},
                     {"embeddings", fs::absolute(a.embeddings).string()},
                     {"scenes", scene_list},
                     {"extra_classes", a.extra_classes}});
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  std::vector<std::string> names = ck.class_names;
  names.insert(names.end(), a.extra_classes.begin(), a.extra_classes.end());
  const AnchorTable table = load_embeddings(a.embeddings, names, ck.anchor_options);
  for (const auto& s : a.scenes) {
    const Matrix probs = infer_scene(read_points(s), ck, table);
    const fs::path out = fs::path(a.out) / (fs::path(s).stem().string() + ".probs");
    write_probabilities(out, probs, table.class_names());
  }
  return kOk;
}

struct EvalArgs {
  std::vector<std::string> probs;
  std::vector<std::string> gt;
  std::string pooling = "pooled";
  std::string out;
};

int cmd_eval(const EvalArgs& a) {
  if (a.probs.size() != a.gt.size()) {
    throw ConfigError("gt", "need one ground-truth file per probability file");
  }
  if (a.pooling != "pooled" && a.pooling != "per-scene") {
    throw ConfigError("pooling", "expected pooled or per-scene");
  }
  Json pairs = Json::array();
  for (std::size_t i = 0; i < a.probs.size(); ++i) {
    pairs.push_back({{"probs", fs::absolute(a.probs[i]).string()}, {"gt", fs::absolute(a.gt[i]).string()}});
  }
  save_resolved(a.out, "eval", Json{{"inputs", pairs}, {"pooling", a.pooling}});

  std::vector<Matrix> probs;
  std::vector<std::vector<int>> gts;
  std::vector<std::string> names;
  std::vector<int> predicted, labelled_gt;
  for (std::size_t i = 0; i < a.probs.size(); ++i) {
    std::vector<std::string> these;
    probs.push_back(read_probabilities(a.probs[i], &these));
    if (i == 0) names = these;
    if (these != names) throw DimensionError("eval: probability files list different classes");
    const PointCloud gt = read_points(a.gt[i]);
    if (!gt.labels) throw ParseError(a.gt[i], 1, "ground-truth file has no label column");
    if (gt.size() != static_cast<std::size_t>(probs.back().rows())) {
      throw DimensionError("eval: " + a.probs[i] + " and " + a.gt[i] + " differ in point count");
    }
    gts.push_back(*gt.labels);
    // mIoU over labelled points only; background has no class to predict.
    const std::vector<int> arg = argmax_labels(probs.back());
    for (std::size_t p = 0; p < arg.size(); ++p) {
      if (gts.back()[p] < 0) continue;
      predicted.push_back(arg[p]);
      labelled_gt.push_back(gts.back()[p]);
    }
  }
  std::vector<int> classes(names.size());
  std::iota(classes.begin(), classes.end(), 0);
  EvalReport report = evaluate_salient(
      probs, gts, classes, a.pooling == "pooled" ? ApPooling::kPooled : ApPooling::kPerScene, names);
  const IouResult iou = mean_iou(predicted, labelled_gt, classes);
  report.iou = iou.per_class;
  for (auto& m : report.iou) m.name = names[static_cast<std::size_t>(m.class_id)];
  if (!iou.per_class.empty()) report.miou = iou.miou;

  std::ofstream text(fs::path(a.out) / "report.txt");
  report.write_text(text);
  std::ofstream kv(fs::path(a.out) / "report.kv");
  report.write_key_values(kv);
  report.write_text(std::cout);
  return kOk;
}

int cmd_gradcheck(std::uint64_t seed, int trials) {
  const auto rows = run_gradcheck_suite(seed, trials);
  print_gradcheck_table(std::cout, rows);
  for (const auto& r : rows) {
    if (!r.passed) return kFailure;
  }
  return kOk;
}

int cmd_make_toy(const std::string& out, std::uint64_t seed) {
  write_toy_dataset(out, seed);
  std::cerr << "[make-toy] wrote toy dataset to " << out << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label-free 3D scene understanding from CAD models"};
  app.require_subcommand(1);

  SampleArgs sample;
  auto* sc = app.add_subcommand("sample", "Poisson-disk sample a mesh");
  sc->add_option("--mesh", sample.mesh, "OFF mesh")->required();
  sc->add_option("--n", sample.n, "number of points")->check(CLI::PositiveNumber);
  sc->add_option("--seed", sample.seed);
  sc->add_option("--out", sample.out, "output directory")->required();

  SimulateArgs sim;
  auto* sm = app.add_subcommand("simulate", "Compose labeled crowded scenes");
  sm->add_option("--manifest", sim.manifest)->required();
  sm->add_option("--config", sim.config, "JSON with scenes, models_per_scene, augment");
  sm->add_option("--scenes", sim.scenes);
  sm->add_option("--models-per-scene", sim.models_per_scene);
  sm->add_option("--seed", sim.seed);
  sm->add_option("--out", sim.out)->required();

  TrainArgs tr;
  auto* tc = app.add_subcommand("train", "Train encoder, prototypes and anchor projection");
  tc->add_option("--config", tr.config)->required();
  tc->add_option("--seed", tr.seed, "overrides the config seed");
  tc->add_option("--threads", tr.threads, "scene-level worker threads (default 1)");
  tc->add_option("--epochs", tr.epochs, "overrides train.epochs");
  tc->add_option("--out", tr.out)->required();

  InferArgs inf;
  auto* ic = app.add_subcommand("infer", "Per-point class probabilities");
  ic->add_option("--checkpoint", inf.checkpoint)->required();
  ic->add_option("--embeddings", inf.embeddings)->required();
  ic->add_option("--scene", inf.scenes, "point file(s)")->required();
  ic->add_option("--extra-class", inf.extra_classes, "unseen class appended to the table");
  ic->add_option("--out", inf.out)->required();
  // Accepted for interface symmetry; inference has no randomness.
  std::uint64_t infer_seed = 0;
  ic->add_option("--seed", infer_seed);

  EvalArgs ev;
  auto* ec = app.add_subcommand("eval", "AP / AmAP / mIoU report");
  ec->add_option("--probs", ev.probs)->required();
  ec->add_option("--gt", ev.gt, "labelled point file(s)")->required();
  ec->add_option("--pooling", ev.pooling, "pooled or per-scene");
  ec->add_option("--out", ev.out)->required();
  std::uint64_t eval_seed = 0;
  ec->add_option("--seed", eval_seed);

  std::uint64_t gc_seed = 0;
  int gc_trials = 100;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference checks of every gradient");
  gc->add_option("--seed", gc_seed, "first seed");
  gc->add_option("--trials", gc_trials)->check(CLI::PositiveNumber);

  std::string toy_out;
  std::uint64_t toy_seed = 7;
  auto* mt = app.add_subcommand("make-toy", "Write the procedural toy dataset");
  mt->add_option("--out", toy_out)->required();
  mt->add_option("--seed", toy_seed, "embedding seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (sc->parsed()) return cmd_sample(sample);
    if (sm->parsed()) return cmd_simulate(sim);
    if (tc->parsed()) return cmd_train(tr);
    if (ic->parsed()) return cmd_infer(inf);
    if (ec->parsed()) return cmd_eval(ev);
    if (gc->parsed()) return cmd_gradcheck(gc_seed, gc_trials);
    if (mt->parsed()) return cmd_make_toy(toy_out, toy_seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kIo;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
