#include <doctest.h>

#include <sstream>

#include "cadscene/errors.hpp"
#include "cadscene/eval.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cadscene;

namespace {

std::vector<int> random_binary(Rng& rng, std::size_t n) {
  std::vector<int> y(n);
  std::bernoulli_distribution coin(0.4);
  for (auto& v : y) v = coin(rng) ? 1 : 0;
  y[0] = 1;
  return y;
}

}  // namespace

TEST_CASE("average precision examples") {
  CHECK(average_precision(std::vector<double>{0.9, 0.8, 0.1}, std::vector<int>{1, 1, 0}) == 1.0);
  const double ap = average_precision(std::vector<double>{0.9, 0.8, 0.7, 0.6}, std::vector<int>{1, 0, 1, 0});
  CHECK(std::abs(ap - (1.0 + 2.0 / 3.0) / 2.0) < 1e-9);
  CHECK(std::abs(ap - 0.833333) < 1e-6);

  SUBCASE("all scores equal gives the positive fraction") {
    for (int n : {2, 4, 10, 64}) {
      std::vector<double> s(static_cast<std::size_t>(n), 0.3);
      std::vector<int> y(static_cast<std::size_t>(n), 0);
      for (int i = 0; i < n / 2; ++i) y[static_cast<std::size_t>(2 * i)] = 1;
      CHECK(std::abs(average_precision(s, y) - 0.5) < 1e-12);
      CHECK(std::abs(test::set_ap(s, y) - 0.5) < 1e-12);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(average_precision(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 0}),
                    InvalidArgument);
    CHECK_THROWS_AS(average_precision(std::vector<double>{0.1}, std::vector<int>{1, 0}),
                    DimensionError);
  }
}

TEST_CASE("average precision properties") {
  Rng rng(1);
  SUBCASE("matches the set definition, with and without ties") {
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 30)(rng);
      const auto y = random_binary(rng, n);
      std::vector<double> s(n);
      std::uniform_int_distribution<int> coarse(0, 5);  // many ties
      for (auto& v : s) v = trial % 2 ? coarse(rng) / 5.0 : std::uniform_real_distribution<double>()(rng);
      CHECK(std::abs(average_precision(s, y) - test::set_ap(s, y)) < 1e-12);
    }
  }
  SUBCASE("strictly monotone transforms") {
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 50)(rng);
      const auto y = random_binary(rng, n);
      std::vector<double> s(n), t1(n), t2(n);
      std::uniform_int_distribution<int> coarse(0, 8);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = coarse(rng) / 8.0;
        t1[i] = std::exp(3.0 * s[i]) - 7.0;
        t2[i] = 1.0 / (1.0 + std::exp(-10.0 * (s[i] - 0.5)));
      }
      const double ap = average_precision(s, y);
      CHECK(std::abs(ap - average_precision(t1, y)) < 1e-12);
      CHECK(std::abs(ap - average_precision(t2, y)) < 1e-12);
    }
  }
  SUBCASE("reversed ranking never beats the perfect one") {
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 40)(rng);
      const auto y = random_binary(rng, n);
      std::vector<double> perfect(n), reversed(n);
      for (std::size_t i = 0; i < n; ++i) {
        perfect[i] = y[i] + 0.001 * static_cast<double>(i);
        reversed[i] = -perfect[i];
      }
      const double best = average_precision(perfect, y);
      CHECK(best == 1.0);
      CHECK(average_precision(reversed, y) <= best);
    }
  }
  SUBCASE("range") {
    for (int trial = 0; trial < 100; ++trial) {
      const auto y = random_binary(rng, 20);
      std::vector<double> s(20);
      for (auto& v : s) v = std::uniform_real_distribution<double>()(rng);
      const double ap = average_precision(s, y);
      CHECK(ap > 0.0);
      CHECK(ap <= 1.0);
    }
  }
}

TEST_CASE("evaluate_salient") {
  const std::vector<int> gt{0, 1, 2, 1, kBackgroundLabel, 0, 2, kBackgroundLabel};
  SUBCASE("one-hot ground truth scores perfectly") {
    Matrix p = Matrix::Zero(8, 3);
    for (int i = 0; i < 8; ++i) {
      if (gt[static_cast<std::size_t>(i)] >= 0) p(i, gt[static_cast<std::size_t>(i)]) = 1.0;
    }
    const EvalReport r = evaluate_salient(p, gt, {0, 1, 2});
    REQUIRE(r.ap.size() == 3);
    for (const auto& m : r.ap) CHECK(m.value == 1.0);
    CHECK(r.amap == 1.0);
    CHECK(r.points == 8);
  }
  SUBCASE("uniform probabilities give positive fractions") {
    const EvalReport r = evaluate_salient(Matrix::Constant(8, 3, 1.0 / 3), gt, {0, 1, 2});
    for (const auto& m : r.ap) CHECK(std::abs(m.value - 2.0 / 8.0) < 1e-12);
    CHECK(std::abs(r.amap - 0.25) < 1e-12);
  }
  SUBCASE("AmAP is the mean of the reported APs") {
    Rng rng(2);
    const Matrix p = test::random_matrix(rng, 8, 3).array().abs();
    const EvalReport r = evaluate_salient(p, gt, {0, 1, 2});
    double sum = 0.0;
    for (const auto& m : r.ap) sum += m.value;
    CHECK(r.amap == sum / 3.0);
  }
  SUBCASE("absent classes are skipped and flagged") {
    const std::vector<int> only_one{1, 1, kBackgroundLabel, kBackgroundLabel};
    Matrix p(4, 3);
    p << 0.2, 0.9, 0.1,  //
        0.3, 0.4, 0.3,   //
        0.3, 0.6, 0.1,   //
        0.5, 0.1, 0.4;
    const EvalReport r = evaluate_salient(p, only_one, {0, 1, 2});
    REQUIRE(r.ap.size() == 1);
    CHECK(r.ap[0].class_id == 1);
    CHECK(r.skipped_classes == std::vector<int>{0, 2});
    CHECK(r.amap == r.ap[0].value);
    CHECK(std::abs(r.amap - (1.0 + 2.0 / 3.0) / 2.0) < 1e-12);
  }
  SUBCASE("missing probability column") {
    CHECK_THROWS_AS(evaluate_salient(Matrix::Zero(8, 2), gt, {0, 1, 2}), DimensionError);
  }
  SUBCASE("pooling modes") {
    const std::vector<Matrix> probs{Matrix::Constant(2, 2, 0.5), (Matrix(2, 2) << 0.9, 0.1, 0.2, 0.8).finished()};
    const std::vector<std::vector<int>> labels{{0, 1}, {0, 1}};
    const EvalReport per = evaluate_salient(probs, labels, {0, 1}, ApPooling::kPerScene);
    // scene 1: AP 0.5 each; scene 2: AP 1 each.
    CHECK(std::abs(per.amap - 0.75) < 1e-12);
    CHECK(per.scenes == 2);
    const EvalReport pooled = evaluate_salient(probs, labels, {0, 1}, ApPooling::kPooled);
    std::vector<double> s0{0.5, 0.5, 0.9, 0.2};
    std::vector<int> y0{1, 0, 1, 0};
    CHECK(std::abs(pooled.ap[0].value - test::set_ap(s0, y0)) < 1e-12);
    CHECK(pooled.points == 4);
  }
  SUBCASE("reports") {
    const EvalReport r = evaluate_salient(Matrix::Constant(8, 3, 0.2), gt, {0, 1, 2}, {"a", "b", "c"});
    std::ostringstream kv, text;
    r.write_key_values(kv);
    r.write_text(text);
    CHECK(kv.str().find("amap=0.25") != std::string::npos);
    CHECK(text.str().find("AmAP") != std::string::npos);
    CHECK(text.str().find("b") != std::string::npos);
  }
}

TEST_CASE("mean IoU") {
  SUBCASE("worked example") {
    const IouResult r = mean_iou(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 1, 1, 1}, {0, 1});
    REQUIRE(r.per_class.size() == 2);
    CHECK(std::abs(r.per_class[0].value - 0.5) < 1e-15);
    CHECK(std::abs(r.per_class[1].value - 2.0 / 3.0) < 1e-15);
    CHECK(std::abs(r.miou - 7.0 / 12.0) < 1e-15);
  }
  SUBCASE("identical labellings") {
    const std::vector<int> a{2, 0, 1, 1, 2};
    CHECK(mean_iou(a, a, {0, 1, 2}).miou == 1.0);
  }
  SUBCASE("disjoint class") {
    const IouResult r = mean_iou(std::vector<int>{0, 0}, std::vector<int>{1, 1}, {0, 1});
    CHECK(r.miou == 0.0);
  }
  SUBCASE("classes absent from both are left out") {
    const IouResult r = mean_iou(std::vector<int>{0, 0}, std::vector<int>{0, 0}, {0, 1, 2});
    CHECK(r.per_class.size() == 1);
    CHECK(r.miou == 1.0);
  }
  SUBCASE("confusion-matrix brute force") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 40)(rng);
      std::uniform_int_distribution<int> label(0, 4);
      std::vector<int> pred(n), gt(n);
      for (std::size_t i = 0; i < n; ++i) {
        pred[i] = label(rng);
        gt[i] = label(rng);
      }
      CHECK(std::abs(mean_iou(pred, gt, {0, 1, 2, 3, 4}).miou - test::confusion_miou(pred, gt, 5)) < 1e-12);
    }
  }
}

TEST_CASE("argmax labels") {
  Matrix p(3, 3);
  p << 0.1, 0.7, 0.2,  //
      0.5, 0.2, 0.3,   //
      0.2, 0.2, 0.6;
  CHECK(argmax_labels(p) == std::vector<int>{1, 0, 2});
}
