#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "cadscene/adam.hpp"
#include "cadscene/checkpoint.hpp"
#include "cadscene/errors.hpp"
#include "cadscene/objective.hpp"
#include "test_util.hpp"

using namespace cadscene;

namespace {

Checkpoint sample_checkpoint(bool with_bank) {
  Rng rng(1);
  AnchorTable table({"chair", "night stand", "lamp"}, test::random_matrix(rng, 3, 7));
  ModelConfig model;
  model.widths = {1, 3, 5};
  model.use_dcr = with_bank;
  model.prototypes = 9;
  model.attention_dim = 2;
  model.temperature = 0.7;
  return initialize_checkpoint(model, table, 42);
}

}  // namespace

TEST_CASE("checkpoint round trip") {
  for (bool with_bank : {true, false}) {
    const Checkpoint ck = sample_checkpoint(with_bank);
    std::stringstream buf;
    write_checkpoint(buf, ck);
    const std::string bytes = buf.str();
    const Checkpoint back = read_checkpoint(buf);
    CHECK(bitwise_equal(ck, back));
    CHECK(back.bank.has_value() == with_bank);
    CHECK(back.class_names == ck.class_names);
    CHECK(back.temperature == 0.7);
    CHECK(back.encoder.voxel_size == ck.encoder.voxel_size);
    std::stringstream again;
    write_checkpoint(again, back);
    CHECK(again.str() == bytes);
  }
}

TEST_CASE("checkpoint file round trip") {
  const auto path = std::filesystem::temp_directory_path() / "cadscene_test.ckpt";
  const Checkpoint ck = sample_checkpoint(true);
  save_checkpoint(path, ck);
  CHECK(bitwise_equal(load_checkpoint(path), ck));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
}

TEST_CASE("corrupt checkpoints") {
  std::stringstream buf;
  write_checkpoint(buf, sample_checkpoint(true));
  const std::string good = buf.str();
  SUBCASE("bad magic") {
    std::string bad = good;
    bad[0] = 'X';
    std::istringstream in(bad);
    CHECK_THROWS_AS(read_checkpoint(in), IoError);
  }
  SUBCASE("unknown version") {
    std::string bad = good;
    bad[8] = 9;
    std::istringstream in(bad);
    CHECK_THROWS_AS(read_checkpoint(in), IoError);
  }
  SUBCASE("truncated") {
    std::istringstream in(good.substr(0, good.size() / 2));
    CHECK_THROWS_AS(read_checkpoint(in), IoError);
  }
}

TEST_CASE("adam") {
  SUBCASE("first step moves each coordinate by the learning rate") {
    // Bias-corrected m/sqrt(v) is sign(g) on step one.
    std::vector<double> p{1.0, -2.0, 0.5};
    const std::vector<double> g{0.3, -4.0, 1e-3};
    Adam adam(AdamConfig{0.1, 0.9, 0.999, 1e-12});
    adam.step({std::span<double>(p)}, {std::span<const double>(g)});
    CHECK(p[0] == doctest::Approx(0.9));
    CHECK(p[1] == doctest::Approx(-1.9));
    CHECK(p[2] == doctest::Approx(0.4));
    CHECK(adam.steps_taken() == 1);
  }
  SUBCASE("minimizes a quadratic") {
    std::vector<double> p{3.0, -1.0};
    Adam adam(AdamConfig{0.05});
    for (int i = 0; i < 2000; ++i) {
      const std::vector<double> g{2 * (p[0] - 1.0), 2 * (p[1] + 0.5)};
      adam.step({std::span<double>(p)}, {std::span<const double>(g)});
    }
    CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(p[1] == doctest::Approx(-0.5).epsilon(1e-3));
  }
  SUBCASE("shape changes are rejected") {
    std::vector<double> p{1.0, 2.0};
    std::vector<double> g{1.0, 2.0};
    Adam adam;
    adam.step({std::span<double>(p)}, {std::span<const double>(g)});
    std::vector<double> q{1.0};
    CHECK_THROWS_AS(adam.step({std::span<double>(q)}, {std::span<const double>(g).first(1)}),
                    DimensionError);
  }
}
