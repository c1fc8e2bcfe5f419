#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using std::string;
namespace fs = std::filesystem;

namespace {

const fs::path kToy = CADSCENE_TOY_DIR;

struct Run {
  int code;
  string output;
};

string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

string q(const fs::path& p) { return "\"" + p.string() + "\""; }

Run cli(const string& args) {
  static int counter = 0;
  const fs::path log = fs::temp_directory_path() / ("cadscene_cli_" + std::to_string(counter++) + ".log");
  const string cmd = q(CADSCENE_CLI) + " " + args + " > " + q(log) + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r{WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
  fs::remove(log);
  return r;
}

int count_lines(const fs::path& p) {
  std::ifstream in(p);
  string line;
  int n = 0;
  while (std::getline(in, line)) n += line.empty() || line[0] == '#' ? 0 : 1;
  return n;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("sample writes n points and echoes its config") {
  TempDir t("cadscene_cli_sample");
  const string mesh = q(kToy / "meshes/box_0.off");
  REQUIRE(cli("sample --mesh " + mesh + " --n 100 --seed 3 --out " + q(t.path / "a")).code == 0);
  REQUIRE(cli("sample --mesh " + mesh + " --n 100 --seed 3 --out " + q(t.path / "b")).code == 0);
  CHECK(count_lines(t.path / "a/points.txt") == 100);
  CHECK(slurp(t.path / "a/points.txt") == slurp(t.path / "b/points.txt"));
  CHECK(fs::exists(t.path / "a/sample.config.json"));
}

TEST_CASE("exit codes") {
  TempDir t("cadscene_cli_codes");
  CHECK(cli("sample --mesh " + q(t.path / "nope.off") + " --n 10 --out " + q(t.path)).code == 3);
  CHECK(cli("sample --mesh x.off --n 0 --out " + q(t.path)).code == 2);
  CHECK(cli("no-such-command").code == 2);

  std::ofstream(t.path / "bad.json") << R"({"data": {"manifest": "m.json", "embeddings": "e.txt"},
    "train": {"adam": {"learning_rate": 0.1}}})";
  const Run r = cli("train --config " + q(t.path / "bad.json") + " --out " + q(t.path / "o"));
  CHECK(r.code == 2);
  CHECK(r.output.find("train.adam.learning_rate") != string::npos);
}

TEST_CASE("simulate, train, infer, eval") {
  TempDir t("cadscene_cli_pipeline");
  const fs::path scenes = t.path / "scenes";
  REQUIRE(cli("simulate --manifest " + q(kToy / "manifest_heldout.json") + " --scenes 2 --seed 5 --out " +
              q(scenes)).code == 0);
  CHECK(fs::exists(scenes / "scene_000.txt"));
  CHECK(fs::exists(scenes / "scene_001.json"));

  SUBCASE("eval of one-hot probabilities gives AmAP 1") {
    // Build probabilities straight from the labels.
    std::ifstream in(scenes / "scene_000.txt");
    std::ofstream out(t.path / "truth.probs");
    out << "# classes\tsphere\tbox\tcylinder\n";
    string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ss(line);
      double x, y, z;
      int label;
      ss >> x >> y >> z >> label;
      for (int c = 0; c < 3; ++c) out << (c ? " " : "") << (c == label ? 1 : 0);
      out << "\n";
    }
    out.close();
    REQUIRE(cli("eval --probs " + q(t.path / "truth.probs") + " --gt " + q(scenes / "scene_000.txt") +
                " --out " + q(t.path / "eval")).code == 0);
    CHECK(slurp(t.path / "eval/report.kv").find("amap=1\n") != string::npos);
  }

  SUBCASE("zero epochs, then inference with an extra class") {
    REQUIRE(cli("train --config " + q(kToy / "train.json") + " --epochs 0 --out " + q(t.path / "t0")).code == 0);
    REQUIRE(cli("train --config " + q(kToy / "train.json") + " --epochs 0 --out " + q(t.path / "t1")).code == 0);
    CHECK(slurp(t.path / "t0/checkpoint.bin") == slurp(t.path / "t1/checkpoint.bin"));
    CHECK(count_lines(t.path / "t0/loss.log") == 0);

    REQUIRE(cli("infer --checkpoint " + q(t.path / "t0/checkpoint.bin") + " --embeddings " +
                q(kToy / "embeddings.txt") + " --scene " + q(scenes / "scene_000.txt") +
                " --extra-class ball --out " + q(t.path / "p")).code == 0);
    const string probs = slurp(t.path / "p/scene_000.probs");
    CHECK(probs.rfind("# classes\tsphere\tbox\tcylinder\tball\n", 0) == 0);
    CHECK(count_lines(t.path / "p/scene_000.probs") == count_lines(scenes / "scene_000.txt"));
  }
}

TEST_CASE("gradcheck exits cleanly") {
  const Run r = cli("gradcheck --trials 3");
  CHECK(r.code == 0);
  CHECK(r.output.find("dcr/") != string::npos);
}
