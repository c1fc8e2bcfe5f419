#include <doctest.h>

#include <cmath>

#include "cadscene/dcr.hpp"
#include "cadscene/errors.hpp"
#include "cadscene/gradcheck.hpp"
#include "test_util.hpp"

using namespace cadscene;

namespace {

PrototypeBank random_bank(Rng& rng, int k, int d, int da, double lambda) {
  PrototypeBank bank;
  bank.prototypes = test::random_matrix(rng, k, d);
  bank.key = test::random_matrix(rng, d, da);
  bank.query = test::random_matrix(rng, d, da);
  bank.lambda = lambda;
  return bank;
}

// Logits written out as explicit sums, independent of the matrix code path.
std::vector<double> brute_logits(const Vector& x, const PrototypeBank& bank) {
  std::vector<double> logits;
  for (int k = 0; k < bank.count(); ++k) {
    double dot = 0.0;
    for (int a = 0; a < bank.attention_dim(); ++a) {
      double key = 0.0, query = 0.0;
      for (int d = 0; d < bank.dim(); ++d) {
        key += bank.key(d, a) * x(d);
        query += bank.query(d, a) * bank.prototypes(k, d);
      }
      dot += key * query;
    }
    logits.push_back(bank.lambda * dot);
  }
  return logits;
}

double entropy(const Vector& p) {
  double h = 0.0;
  for (double v : p) h -= v > 0.0 ? v * std::log(v) : 0.0;
  return h;
}

}  // namespace

TEST_CASE("coefficients") {
  Rng rng(1);
  SUBCASE("a single prototype gets all the weight") {
    const PrototypeBank bank = random_bank(rng, 1, 4, 3, 0.5);
    const Vector x = test::random_matrix(rng, 4, 1);
    const Vector a = coefficients(x, bank);
    REQUIRE(a.size() == 1);
    CHECK(a(0) == 1.0);
    CHECK(project(x, bank) == bank.prototypes.row(0).transpose());
  }
  SUBCASE("zero key gives uniform weights and the prototype mean") {
    PrototypeBank bank = random_bank(rng, 7, 4, 3, 0.5);
    bank.key.setZero();
    const Vector x = test::random_matrix(rng, 4, 1);
    const Vector a = coefficients(x, bank);
    for (double v : a) CHECK(std::abs(v - 1.0 / 7.0) < 1e-15);
    const Vector mean = bank.prototypes.colwise().mean().transpose();
    CHECK((project(x, bank) - mean).norm() < 1e-12);
  }
  SUBCASE("large lambda approaches the argmax one-hot") {
    PrototypeBank bank = random_bank(rng, 6, 4, 3, 1.0);
    const Vector x = test::random_matrix(rng, 4, 1);
    std::vector<double> logits = brute_logits(x, bank);
    std::vector<double> sorted = logits;
    std::sort(sorted.rbegin(), sorted.rend());
    REQUIRE(sorted[0] - sorted[1] > 5e-3);  // distinct logits
    const auto argmax = std::max_element(logits.begin(), logits.end()) - logits.begin();

    bank.lambda = 1e4;
    const Vector a = coefficients(x, bank);
    // Brute-force softmax at the same lambda.
    double z = 0.0;
    for (double l : logits) z += std::exp(1e4 * (l - sorted[0]));
    for (int k = 0; k < 6; ++k) {
      const double expected = std::exp(1e4 * (logits[static_cast<std::size_t>(k)] - sorted[0])) / z;
      CHECK(std::abs(a(k) - expected) < 1e-12);
      CHECK(std::abs(a(k) - (k == argmax ? 1.0 : 0.0)) < 1e-6);
    }
  }
  SUBCASE("matches explicit sums") {
    const PrototypeBank bank = random_bank(rng, 9, 5, 4, 0.7);
    const Vector x = test::random_matrix(rng, 5, 1);
    const auto logits = brute_logits(x, bank);
    double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    const Vector a = coefficients(x, bank);
    for (int k = 0; k < 9; ++k) {
      CHECK(std::abs(a(k) - std::exp(logits[static_cast<std::size_t>(k)] - mx) / z) < 1e-12);
    }
  }
  SUBCASE("non-finite input") {
    const PrototypeBank bank = random_bank(rng, 5, 4, 3, 0.5);
    Vector x = Vector::Zero(4);
    x(2) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(coefficients(x, bank), InvalidArgument);
    CHECK_THROWS_AS(coefficients(Vector::Zero(3), bank), DimensionError);
  }
}

TEST_CASE("projection") {
  Rng rng(2);
  const PrototypeBank bank = random_bank(rng, 12, 6, 4, 0.5);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x = test::random_matrix(rng, 6, 1, 3.0);
    const Vector a = coefficients(x, bank);
    Vector rebuilt = Vector::Zero(6);
    for (int k = 0; k < 12; ++k) rebuilt += a(k) * bank.prototypes.row(k).transpose();
    CHECK((project(x, bank) - rebuilt).norm() < 1e-12);
  }
}

TEST_CASE("convex-hull properties") {
  Rng rng(3);
  double max_norm_excess = -1.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const PrototypeBank bank = random_bank(rng, 10, 4, 3, 0.5);
    const Vector x = test::random_matrix(rng, 4, 1, 5.0);
    const Vector a = coefficients(x, bank);
    CHECK(a.minCoeff() >= 0.0);
    CHECK(std::abs(a.sum() - 1.0) < 1e-6);
    const double bound = bank.prototypes.rowwise().norm().maxCoeff();
    max_norm_excess = std::max(max_norm_excess, project(x, bank).norm() - bound);
  }
  CHECK(max_norm_excess <= 1e-9);

  SUBCASE("softmax ignores a common logit shift") {
    for (int trial = 0; trial < 100; ++trial) {
      const Vector logits = test::random_matrix(rng, 8, 1, 4.0);
      const double shift = std::uniform_real_distribution<double>(-50.0, 50.0)(rng);
      const Vector a = stable_softmax(logits);
      const Vector b = stable_softmax((logits.array() + shift).matrix());
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
  SUBCASE("entropy falls as lambda grows") {
    for (int trial = 0; trial < 100; ++trial) {
      PrototypeBank bank = random_bank(rng, 16, 4, 3, 1.0);
      const Vector x = test::random_matrix(rng, 4, 1);
      double previous = std::numeric_limits<double>::infinity();
      for (double lambda : {0.1, 0.5, 1.0, 4.0}) {
        bank.lambda = lambda;
        const double h = entropy(coefficients(x, bank));
        CHECK(h <= previous + 1e-12);
        previous = h;
      }
    }
  }
}

TEST_CASE("dcr backward") {
  Rng rng(4);
  PrototypeBank bank = random_bank(rng, 5, 4, 3, 0.8);
  const Matrix x = test::random_matrix(rng, 6, 4);

  SUBCASE("needs a forward pass") {
    CHECK_THROWS_AS(dcr_backward(DcrTape{}, bank, Matrix::Zero(6, 4)), StateError);
  }
  SUBCASE("zero upstream") {
    DcrTape tape;
    dcr_project(x, bank, &tape);
    const DcrGradients g = dcr_backward(tape, bank, Matrix::Zero(6, 4));
    CHECK(g.features.isZero(0.0));
    CHECK(g.bank.prototypes.isZero(0.0));
    CHECK(g.bank.key.isZero(0.0));
    CHECK(g.bank.query.isZero(0.0));
  }
  SUBCASE("lambda zero freezes the attention maps") {
    bank.lambda = 0.0;
    DcrTape tape;
    dcr_project(x, bank, &tape);
    const DcrGradients g = dcr_backward(tape, bank, test::random_matrix(rng, 6, 4));
    CHECK(g.bank.key.isZero(0.0));
    CHECK(g.bank.query.isZero(0.0));
    CHECK(g.features.isZero(0.0));
    CHECK_FALSE(g.bank.prototypes.isZero(0.0));
  }
  SUBCASE("finite differences") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      for (const auto& e : check_dcr_gradients(seed)) {
        INFO(e.name << " seed " << seed);
        CHECK(e.error < 1e-4);
      }
    }
  }
}

TEST_CASE("prototype bank construction") {
  Rng rng(5);
  const PrototypeBank bank = PrototypeBank::initialize(128, 96, 16, 0.5, rng);
  CHECK(bank.count() == 128);
  CHECK(bank.dim() == 96);
  CHECK(bank.attention_dim() == 16);
  for (int k = 0; k < bank.count(); ++k) CHECK(bank.prototypes.row(k).norm() == doctest::Approx(1.0));
  const double bound = std::sqrt(1.0 / 96);
  CHECK(bank.key.cwiseAbs().maxCoeff() <= bound);
  CHECK(bank.query.cwiseAbs().maxCoeff() <= bound);

  CHECK_THROWS_AS(PrototypeBank::initialize(96, 96, 16, 0.5, rng), InvalidArgument);
  CHECK_THROWS_AS(PrototypeBank::initialize(128, 96, 16, 0.0, rng), InvalidArgument);
}
