#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cadscene/config.hpp"
#include "cadscene/errors.hpp"

using namespace cadscene;
namespace fs = std::filesystem;

namespace {

std::string config_error_path(const Json& j) {
  try {
    parse_train_config(j, "/base");
  } catch (const ConfigError& e) {
    return e.key_path();
  }
  return "";
}

Json minimal() {
  return Json::parse(R"({"data": {"manifest": "m.json", "embeddings": "e.txt"}})");
}

}  // namespace

TEST_CASE("train config defaults and relative paths") {
  const TrainRunConfig c = parse_train_config(minimal(), "/base");
  CHECK(c.manifest == fs::path("/base/m.json"));
  CHECK(c.embeddings == fs::path("/base/e.txt"));
  CHECK(c.model.prototypes == 128);
  CHECK(c.model.lambda == 0.5);
  CHECK(c.train.adam.learning_rate == 1e-3);
  CHECK(c.train.epochs == 200);
}

TEST_CASE("train config overrides") {
  Json j = minimal();
  j["seed"] = 9;
  j["threads"] = 3;
  j["model"] = {{"prototypes", 200}, {"lambda", 2.0}, {"use_dcr", false}, {"widths", {1, 8, 16}}};
  j["train"] = {{"epochs", 3}, {"adam", {{"lr", 0.01}}}};
  j["augment"] = {{"crop_prob", 0.0}, {"scene_bounds", {{"x_min", -2.0}}}};
  j["anchors"] = {{"normalize", true}, {"multi_token", "concatenate"}};
  const TrainRunConfig c = parse_train_config(j, "/base");
  CHECK(c.seed == 9);
  CHECK(c.train.seed == 9);
  CHECK(c.train.threads == 3);
  CHECK(c.model.prototypes == 200);
  CHECK_FALSE(c.model.use_dcr);
  CHECK(c.model.widths == std::vector<int>{1, 8, 16});
  CHECK(c.train.epochs == 3);
  CHECK(c.train.adam.learning_rate == 0.01);
  CHECK(c.augment.crop_prob == 0.0);
  CHECK(c.augment.scene_bounds.x_min == -2.0);
  CHECK(c.anchors.normalize);
}

TEST_CASE("config errors name the key path") {
  Json j = minimal();
  j["train"] = {{"adam", {{"lrr", 0.1}}}};
  CHECK(config_error_path(j) == "train.adam.lrr");

  j = minimal();
  j["bogus"] = 1;
  CHECK(config_error_path(j) == "bogus");

  j = minimal();
  j["model"] = {{"prototypes", "many"}};
  CHECK(config_error_path(j) == "model.prototypes");

  j = minimal();
  j["augment"] = {{"scale_min", 2.0}, {"scale_max", 1.0}};
  CHECK(config_error_path(j).rfind("augment", 0) == 0);

  j = minimal();
  j["anchors"] = {{"multi_token", "sum"}};
  CHECK(config_error_path(j) == "anchors.multi_token");

  CHECK(config_error_path(Json::parse("{}")) == "data.manifest");
}

TEST_CASE("train config round trip") {
  Json j = minimal();
  j["seed"] = 4;
  j["model"] = {{"temperature", 0.5}, {"attention_dim", 8}};
  j["augment"] = {{"jitter_sigma", 0.02}};
  const TrainRunConfig a = parse_train_config(j, "/base");
  const TrainRunConfig b = parse_train_config(to_json(a), "/elsewhere");
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(b.manifest == a.manifest);
}

TEST_CASE("simulate config") {
  const SimulateConfig c = parse_simulate_config(Json::parse(R"({"scenes": 5, "augment": {"crop_prob": 0.25}})"));
  CHECK(c.scenes == 5);
  CHECK(c.models_per_scene == 4);
  CHECK(c.augment.crop_prob == 0.25);
  CHECK(parse_simulate_config(to_json(c)).augment.crop_prob == 0.25);
  CHECK_THROWS_AS(parse_simulate_config(Json::parse(R"({"scenes": 0})")), ConfigError);
  CHECK_THROWS_AS(parse_simulate_config(Json::parse(R"({"scene": 2})")), ConfigError);
}

TEST_CASE("manifest loading") {
  const fs::path dir = fs::temp_directory_path() / "cadscene_test_config";
  fs::create_directories(dir);
  {
    std::ofstream(dir / "classes.txt") << "chair\ntable\n";
    std::ofstream(dir / "m.json") << R"({"classes": "classes.txt", "points_per_model": 64,
      "models": [{"mesh": "a.off", "class": "table"}]})";
  }
  const Manifest m = load_manifest(dir / "m.json");
  CHECK(m.class_names == std::vector<std::string>{"chair", "table"});
  CHECK(m.points_per_model == 64);
  REQUIRE(m.models.size() == 1);
  CHECK(m.models[0].class_id == 1);
  CHECK(m.models[0].mesh == dir / "a.off");

  std::ofstream(dir / "bad.json") << R"({"classes": ["a"], "models": [{"mesh": "a.off", "class": "b"}]})";
  CHECK_THROWS_AS(load_manifest(dir / "bad.json"), ConfigError);
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK_THROWS_AS(load_manifest(dir / "broken.json"), ParseError);
  CHECK_THROWS_AS(load_manifest(dir / "missing.json"), IoError);
  fs::remove_all(dir);
}
