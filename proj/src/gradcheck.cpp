#include "cadscene/gradcheck.hpp"

#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <span>

#include "cadscene/dcr.hpp"
#include "cadscene/lang_anchor.hpp"
#include "cadscene/objective.hpp"
#include "cadscene/sparse_encoder.hpp"

namespace cadscene {

namespace {

std::vector<double> numeric_gradient(std::span<double> param, const std::function<double()>& f,
                                     double h) {
  std::vector<double> grad(param.size());
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double saved = param[i];
    param[i] = saved + h;
    const double up = f();
    param[i] = saved - h;
    const double down = f();
    param[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double block_error(std::span<const double> analytic, const std::vector<double>& numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  diff = std::sqrt(diff);
  const double scale = std::max(std::sqrt(na), std::sqrt(nn));
  return scale < 1e-10 ? diff : diff / scale;
}

GradCheckEntry compare(std::string name, std::span<double> param, std::span<const double> analytic,
                       const std::function<double()>& f, const GradCheckOptions& opt) {
  return {std::move(name), block_error(analytic, numeric_gradient(param, f, opt.step))};
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

double weighted_sum(const Matrix& values, const Matrix& weights) {
  return (values.array() * weights.array()).sum();
}

std::span<double> span_of(Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<const double> span_of(const Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

// A handful of occupied voxels packed into a 3x3x3 block, one or two points
// each, placed away from voxel faces.
PointCloud tiny_cloud(Rng& rng, double voxel, int max_voxels) {
  std::uniform_int_distribution<int> count(4, max_voxels);
  std::uniform_int_distribution<int> cell(0, 2);
  std::uniform_real_distribution<double> inside(0.2, 0.8);
  std::bernoulli_distribution twice(0.3);
  std::set<std::array<int, 3>> cells;
  const int target = count(rng);
  while (static_cast<int>(cells.size()) < target) cells.insert({cell(rng), cell(rng), cell(rng)});
  PointCloud pc;
  for (const auto& c : cells) {
    const int copies = twice(rng) ? 2 : 1;
    for (int k = 0; k < copies; ++k) {
      pc.positions.emplace_back((c[0] + inside(rng)) * voxel, (c[1] + inside(rng)) * voxel,
                                (c[2] + inside(rng)) * voxel);
    }
  }
  return pc;
}

}  // namespace

std::vector<GradCheckEntry> check_dcr_gradients(std::uint64_t seed, const GradCheckOptions& opt) {
  Rng rng(seed);
  const int k = 5, d = 4, da = 3, n = 3;
  PrototypeBank bank;
  bank.prototypes = random_matrix(k, d, rng);
  bank.key = random_matrix(d, da, rng, 0.7);
  bank.query = random_matrix(d, da, rng, 0.7);
  bank.lambda = std::uniform_real_distribution<double>(0.3, 2.0)(rng);
  Matrix x = random_matrix(n, d, rng);
  const Matrix weights = random_matrix(n, d, rng);

  DcrTape tape;
  dcr_project(x, bank, &tape);
  const DcrGradients g = dcr_backward(tape, bank, weights);
  auto f = [&] { return weighted_sum(dcr_project(x, bank), weights); };

  return {compare("features", span_of(x), span_of(g.features), f, opt),
          compare("prototypes", span_of(bank.prototypes), span_of(g.bank.prototypes), f, opt),
          compare("key", span_of(bank.key), span_of(g.bank.key), f, opt),
          compare("query", span_of(bank.query), span_of(g.bank.query), f, opt)};
}

std::vector<GradCheckEntry> check_encoder_gradients(std::uint64_t seed,
                                                    const GradCheckOptions& opt) {
  Rng rng(seed);
  const double voxel = kDefaultVoxelSize;
  const PointCloud pc = tiny_cloud(rng, voxel, 10);
  EncoderParams params = EncoderParams::initialize({1, 2, 3}, voxel, rng);
  // Nonzero biases so every path is exercised.
  for (auto& layer : params.layers) layer.bias = random_matrix(layer.out_width(), 1, rng, 0.1);
  const Matrix weights = random_matrix(static_cast<Eigen::Index>(pc.size()), 3, rng);

  EncoderTape tape;
  encoder_forward(pc, params, &tape);
  const EncoderParams grads = encoder_backward(tape, params, weights);
  auto f = [&] { return weighted_sum(encoder_forward(pc, params), weights); };

  std::vector<GradCheckEntry> out;
  auto param_tensors = params.tensors();
  const auto grad_tensors = grads.tensors();
  // Concatenate the 27 kernel slices of each layer into one block.
  std::size_t t = 0;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    std::vector<double> analytic;
    std::vector<double> numeric;
    for (int o = 0; o < kKernelVolume; ++o, ++t) {
      analytic.insert(analytic.end(), grad_tensors[t].begin(), grad_tensors[t].end());
      const auto num = numeric_gradient(param_tensors[t], f, opt.step);
      numeric.insert(numeric.end(), num.begin(), num.end());
    }
    out.push_back({"layer" + std::to_string(l) + ".weights", block_error(analytic, numeric)});
    out.push_back(compare("layer" + std::to_string(l) + ".bias", param_tensors[t],
                          grad_tensors[t], f, opt));
    ++t;
  }
  return out;
}

std::vector<GradCheckEntry> check_contrastive_gradients(std::uint64_t seed, bool normalize_anchors,
                                                        const GradCheckOptions& opt) {
  Rng rng(seed);
  const int n = 5, d = 4, c = 3, e = 6;
  AnchorOptions options;
  options.normalize = normalize_anchors;
  AnchorTable table({"a", "b", "c"}, random_matrix(c, e, rng), options);
  table.init_projection(d, rng);
  Matrix projection = table.projection();
  Matrix x = random_matrix(n, d, rng);
  std::uniform_int_distribution<int> label(0, c - 1);
  std::vector<int> labels(n);
  for (int& y : labels) y = label(rng);

  const LossResult analytic = contrastive_loss(x, labels, table);
  auto f = [&] {
    table.set_projection(projection);
    return contrastive_loss(x, labels, table).loss;
  };
  const std::string suffix = normalize_anchors ? " (unit anchors)" : "";
  return {compare("features" + suffix, span_of(x), span_of(analytic.feature_grad), f, opt),
          compare("projection" + suffix, span_of(projection), span_of(analytic.projection_grad), f,
                  opt)};
}

std::vector<GradCheckEntry> check_end_to_end_gradients(std::uint64_t seed,
                                                       const GradCheckOptions& opt) {
  Rng rng(seed);
  const double voxel = kDefaultVoxelSize;
  PointCloud pc = tiny_cloud(rng, voxel, 10);
  while (pc.size() > 20) pc.positions.pop_back();
  std::uniform_int_distribution<int> label(-1, 2);
  pc.labels = std::vector<int>(pc.size());
  for (int& y : *pc.labels) y = label(rng);
  (*pc.labels)[0] = 0;  // at least one point carries a loss

  AnchorTable table({"a", "b", "c"}, random_matrix(3, 5, rng));
  ModelConfig model;
  model.widths = {1, 3, 4};
  model.prototypes = 6;
  model.attention_dim = 3;
  model.lambda = 1.0;
  Checkpoint state = initialize_checkpoint(model, table, seed + 1);
  for (auto& layer : state.encoder.layers) {
    layer.bias = random_matrix(layer.out_width(), 1, rng, 0.1);
  }

  const SceneGradients g = scene_gradients(pc, state, table);
  auto f = [&] { return scene_loss(pc, state, table); };

  std::vector<GradCheckEntry> out;
  auto enc_params = state.encoder.tensors();
  const auto enc_grads = g.encoder.tensors();
  std::size_t t = 0;
  for (std::size_t l = 0; l < state.encoder.layers.size(); ++l) {
    std::vector<double> analytic;
    std::vector<double> numeric;
    for (int o = 0; o < kKernelVolume; ++o, ++t) {
      analytic.insert(analytic.end(), enc_grads[t].begin(), enc_grads[t].end());
      const auto num = numeric_gradient(enc_params[t], f, opt.step);
      numeric.insert(numeric.end(), num.begin(), num.end());
    }
    out.push_back({"encoder.layer" + std::to_string(l) + ".weights",
                   block_error(analytic, numeric)});
    out.push_back(compare("encoder.layer" + std::to_string(l) + ".bias", enc_params[t],
                          enc_grads[t], f, opt));
    ++t;
  }
  out.push_back(compare("prototypes", span_of(state.bank->prototypes),
                        span_of(g.bank->prototypes), f, opt));
  out.push_back(compare("key", span_of(state.bank->key), span_of(g.bank->key), f, opt));
  out.push_back(compare("query", span_of(state.bank->query), span_of(g.bank->query), f, opt));
  out.push_back(compare("projection", span_of(state.projection), span_of(g.projection), f, opt));
  return out;
}

std::vector<GradCheckRow> run_gradcheck_suite(std::uint64_t first_seed, int trials,
                                              const GradCheckOptions& opt) {
  std::vector<GradCheckRow> rows;
  std::map<std::string, std::size_t> where;
  auto record = [&](const std::string& suite, const std::vector<GradCheckEntry>& entries) {
    for (const auto& e : entries) {
      const std::string key = suite + "/" + e.name;
      auto [it, inserted] = where.try_emplace(key, rows.size());
      if (inserted) rows.push_back({key, 0.0, 0, true});
      auto& row = rows[it->second];
      row.worst_error = std::max(row.worst_error, e.error);
      ++row.trials;
      row.passed = row.passed && e.error < opt.tolerance;
    }
  };
  for (int i = 0; i < trials; ++i) {
    const std::uint64_t seed = first_seed + static_cast<std::uint64_t>(i);
    record("dcr", check_dcr_gradients(seed, opt));
    record("encoder", check_encoder_gradients(seed, opt));
    record("contrastive", check_contrastive_gradients(seed, false, opt));
    record("contrastive", check_contrastive_gradients(seed, true, opt));
    record("end_to_end", check_end_to_end_gradients(seed, opt));
  }
  return rows;
}

void print_gradcheck_table(std::ostream& out, const std::vector<GradCheckRow>& rows) {
  out << std::left << std::setw(48) << "block" << std::right << std::setw(14) << "worst_error"
      << std::setw(8) << "trials" << "  result\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(48) << r.name << std::right << std::setw(14) << std::scientific
        << std::setprecision(3) << r.worst_error << std::defaultfloat << std::setw(8) << r.trials
        << "  " << (r.passed ? "PASS" : "FAIL") << '\n';
  }
}

}  // namespace cadscene
