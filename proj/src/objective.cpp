#include "cadscene/objective.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <algorithm>
#include <thread>
#include <utility>

#include "cadscene/errors.hpp"

namespace cadscene {

namespace {

Matrix softmax_rows(Matrix logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
  return logits;
}

AnchorTable with_projection(AnchorTable table, const Matrix& projection) {
  table.set_projection(projection);
  return table;
}

void add_into(std::vector<std::span<double>> dst, const std::vector<std::span<const double>>& src,
              double weight) {
  for (std::size_t t = 0; t < dst.size(); ++t) {
    for (std::size_t i = 0; i < dst[t].size(); ++i) dst[t][i] += weight * src[t][i];
  }
}

}  // namespace

LossResult contrastive_loss(const Matrix& features, std::span<const int> labels,
                            const AnchorTable& table) {
  const Matrix& anchors = table.anchors();
  if (anchors.rows() == 0) throw InvalidArgument("contrastive_loss: empty anchor table");
  if (features.cols() != anchors.cols()) {
    throw DimensionError("contrastive_loss: feature width " + std::to_string(features.cols()) +
                         " but anchors have " + std::to_string(anchors.cols()));
  }
  if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
    throw DimensionError("contrastive_loss: one label per feature row required");
  }
  if (labels.empty()) throw InvalidArgument("contrastive_loss: no labeled points");
  const auto classes = static_cast<int>(anchors.rows());
  for (int y : labels) {
    if (y < 0 || y >= classes) {
      throw InvalidArgument("contrastive_loss: label " + std::to_string(y) + " has no anchor");
    }
  }

  const Matrix logits = features * anchors.transpose();
  Matrix probs = softmax_rows(logits);
  const double n = static_cast<double>(labels.size());

  LossResult result;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double max_logit = logits.row(row).maxCoeff();
    const double log_sum = max_logit + std::log((logits.row(row).array() - max_logit).exp().sum());
    result.loss += (log_sum - logits(row, labels[i])) / n;
    probs(row, labels[i]) -= 1.0;
  }
  probs /= n;  // now dLoss/dlogits
  result.feature_grad = probs * anchors;
  result.projection_grad = table.projection_gradient(probs.transpose() * features);
  return result;
}

Matrix class_probs(const Matrix& features, const AnchorTable& table, double temperature) {
  if (table.class_count() == 0) throw InvalidArgument("class_probs: empty anchor table");
  if (!(temperature > 0.0)) throw InvalidArgument("class_probs: temperature must be positive");
  if (features.cols() != table.feature_dim()) {
    throw DimensionError("class_probs: feature width differs from anchor dimension");
  }
  if (!features.allFinite()) throw InvalidArgument("class_probs: non-finite feature");
  return softmax_rows(features * table.anchors().transpose() / temperature);
}

Vector class_probs(const Vector& feature, const AnchorTable& table, double temperature) {
  return class_probs(Matrix(feature.transpose()), table, temperature).row(0).transpose();
}

void ModelConfig::validate() const {
  if (widths.size() < 2 || widths.front() != 1) {
    throw InvalidArgument("model: widths must start at 1 and contain at least one layer");
  }
  for (int w : widths) {
    if (w < 1) throw InvalidArgument("model: widths must be positive");
  }
  if (!(voxel_size > 0.0)) throw InvalidArgument("model: voxel_size must be positive");
  if (use_dcr) {
    if (prototypes <= widths.back()) {
      throw InvalidArgument("model: prototype count must exceed the feature dimension");
    }
    if (attention_dim < 1) throw InvalidArgument("model: attention_dim must be positive");
    if (!(lambda > 0.0)) throw InvalidArgument("model: lambda must be positive");
  }
  if (!(temperature > 0.0)) throw InvalidArgument("model: temperature must be positive");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw InvalidArgument("train: epochs must be >= 0");
  if (steps_per_epoch < 1) throw InvalidArgument("train: steps_per_epoch must be >= 1");
  if (models_per_scene < 1) throw InvalidArgument("train: models_per_scene must be >= 1");
  if (scenes_per_step < 1) throw InvalidArgument("train: scenes_per_step must be >= 1");
  if (!(adam.learning_rate >= 0.0)) throw InvalidArgument("train: learning rate must be >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw InvalidArgument("train: Adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw InvalidArgument("train: Adam epsilon must be positive");
  if (threads < 1) throw InvalidArgument("train: threads must be >= 1");
}

Checkpoint initialize_checkpoint(const ModelConfig& config, AnchorTable& table, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  Checkpoint ck;
  ck.encoder = EncoderParams::initialize(config.widths, config.voxel_size, rng);
  if (config.use_dcr) {
    ck.bank = PrototypeBank::initialize(config.prototypes, config.widths.back(),
                                        config.attention_dim, config.lambda, rng);
  }
  table.init_projection(config.widths.back(), rng);
  ck.projection = table.projection();
  ck.anchor_options = table.options();
  ck.temperature = config.temperature;
  ck.class_names = table.class_names();
  return ck;
}

SceneGradients scene_gradients(const PointCloud& cloud, const Checkpoint& state,
                               const AnchorTable& table) {
  if (!cloud.labels) throw InvalidArgument("scene_gradients: cloud has no labels");
  const AnchorTable anchors = with_projection(table, state.projection);

  SceneGradients out;
  out.encoder = EncoderParams::zeros_like(state.encoder);
  if (state.bank) out.bank = PrototypeBank::zeros_like(*state.bank);
  out.projection = Matrix::Zero(state.projection.rows(), state.projection.cols());

  std::vector<int> rows;
  std::vector<int> labels;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const int y = (*cloud.labels)[i];
    if (y == kBackgroundLabel) continue;
    rows.push_back(static_cast<int>(i));
    labels.push_back(y);
  }
  out.labeled_points = rows.size();
  if (rows.empty()) return out;

  EncoderTape enc_tape;
  const Matrix features = encoder_forward(cloud, state.encoder, &enc_tape);
  DcrTape dcr_tape;
  const Matrix projected = state.bank ? dcr_project(features, *state.bank, &dcr_tape) : features;

  const LossResult loss = contrastive_loss(projected(rows, Eigen::all), labels, anchors);
  out.loss = loss.loss;
  out.projection = loss.projection_grad;

  Matrix projected_grad = Matrix::Zero(projected.rows(), projected.cols());
  projected_grad(rows, Eigen::all) = loss.feature_grad;

  Matrix feature_grad;
  if (state.bank) {
    DcrGradients g = dcr_backward(dcr_tape, *state.bank, projected_grad);
    out.bank = std::move(g.bank);
    feature_grad = std::move(g.features);
  } else {
    feature_grad = std::move(projected_grad);
  }
  out.encoder = encoder_backward(enc_tape, state.encoder, feature_grad);
  return out;
}

double scene_loss(const PointCloud& cloud, const Checkpoint& state, const AnchorTable& table) {
  if (!cloud.labels) throw InvalidArgument("scene_loss: cloud has no labels");
  const AnchorTable anchors = with_projection(table, state.projection);
  std::vector<int> rows;
  std::vector<int> labels;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const int y = (*cloud.labels)[i];
    if (y == kBackgroundLabel) continue;
    rows.push_back(static_cast<int>(i));
    labels.push_back(y);
  }
  if (rows.empty()) return 0.0;
  const Matrix features = encoder_forward(cloud, state.encoder);
  const Matrix projected = state.bank ? dcr_project(features, *state.bank) : features;
  return contrastive_loss(projected(rows, Eigen::all), labels, anchors).loss;
}

SimulatedScene draw_scene(const TrainData& data, int models_per_scene, Rng& rng) {
  std::vector<LabeledModel> models = pick_models(data.models, models_per_scene, rng);
  std::optional<PointCloud> background;
  if (!data.backgrounds.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, data.backgrounds.size() - 1);
    background = data.backgrounds[pick(rng)];
  }
  return simulate_scene(background, models, data.augment, rng);
}

Rng derive_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t step, std::uint64_t slot) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(step),
                    static_cast<std::uint32_t>(slot)};
  return Rng(seq);
}

namespace {

SceneGradients simulate_and_differentiate(const TrainData& data, const Checkpoint& state,
                                          const AnchorTable& table, const TrainConfig& config,
                                          std::uint64_t epoch, std::uint64_t step,
                                          std::uint64_t slot) {
  Rng rng = derive_rng(config.seed, epoch, step, slot);
  const SimulatedScene scene = draw_scene(data, config.models_per_scene, rng);
  if (scene.cloud.empty()) return {};
  return scene_gradients(scene.cloud, state, table);
}

}  // namespace

TrainResult train(const TrainData& data, AnchorTable table, const ModelConfig& model,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  data.augment.validate();
  if (data.models.empty()) throw InvalidArgument("train: no models");
  {
    std::vector<int> classes;
    for (const auto& m : data.models) {
      if (m.class_id < 0 || m.class_id >= static_cast<int>(table.class_count())) {
        throw InvalidArgument("train: model class " + std::to_string(m.class_id) +
                              " has no anchor");
      }
      classes.push_back(m.class_id);
    }
    std::sort(classes.begin(), classes.end());
    if (std::unique(classes.begin(), classes.end()) - classes.begin() < 2) {
      throw InvalidArgument("train: need models from at least two classes");
    }
  }

  TrainResult result;
  Checkpoint state = initialize_checkpoint(model, table, config.seed);
  Adam optimizer(config.adam);
  bool first_step = true;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    double epoch_loss = 0.0;
    int counted = 0;
    for (int step = 0; step < config.steps_per_epoch; ++step) {
      std::vector<SceneGradients> per_scene(static_cast<std::size_t>(config.scenes_per_step));
      auto work = [&](std::size_t slot) {
        per_scene[slot] = simulate_and_differentiate(data, state, table, config,
                                                     static_cast<std::uint64_t>(epoch),
                                                     static_cast<std::uint64_t>(step), slot);
      };
      if (config.threads > 1 && per_scene.size() > 1) {
        std::vector<std::thread> pool;
        const std::size_t workers = std::min<std::size_t>(config.threads, per_scene.size());
        for (std::size_t w = 0; w < workers; ++w) {
          pool.emplace_back([&, w] {
            for (std::size_t s = w; s < per_scene.size(); s += workers) work(s);
          });
        }
        for (auto& t : pool) t.join();
      } else {
        for (std::size_t s = 0; s < per_scene.size(); ++s) work(s);
      }

      // Reduce in slot order so the sum does not depend on thread timing.
      EncoderParams enc_grad = EncoderParams::zeros_like(state.encoder);
      std::optional<PrototypeBank> bank_grad;
      if (state.bank) bank_grad = PrototypeBank::zeros_like(*state.bank);
      Matrix proj_grad = Matrix::Zero(state.projection.rows(), state.projection.cols());
      double step_loss = 0.0;
      int used = 0;
      for (const auto& g : per_scene) used += g.labeled_points > 0 ? 1 : 0;
      if (used == 0) continue;
      const double weight = 1.0 / used;
      for (const auto& g : per_scene) {
        if (g.labeled_points == 0) continue;
        if (!std::isfinite(g.loss)) {
          throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch + 1) +
                                " step " + std::to_string(step + 1));
        }
        step_loss += weight * g.loss;
        add_into(enc_grad.tensors(), std::as_const(g.encoder).tensors(), weight);
        if (bank_grad) add_into(bank_grad->tensors(), std::as_const(*g.bank).tensors(), weight);
        proj_grad += weight * g.projection;
      }

      if (first_step) {
        result.initial_loss = step_loss;
        first_step = false;
      }
      epoch_loss += step_loss;
      ++counted;

      std::vector<std::span<double>> params = state.encoder.tensors();
      std::vector<std::span<const double>> grads = std::as_const(enc_grad).tensors();
      if (state.bank) {
        for (auto t : state.bank->tensors()) params.push_back(t);
        for (auto t : std::as_const(*bank_grad).tensors()) grads.push_back(t);
      }
      params.emplace_back(state.projection.data(), static_cast<std::size_t>(state.projection.size()));
      grads.emplace_back(proj_grad.data(), static_cast<std::size_t>(proj_grad.size()));
      optimizer.step(params, grads);
      table.set_projection(state.projection);
    }

    EpochRecord record;
    record.epoch = epoch + 1;
    record.loss = counted > 0 ? epoch_loss / counted : 0.0;
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!std::isfinite(record.loss)) {
      throw DivergenceError("train: non-finite loss in epoch " + std::to_string(epoch + 1));
    }
    result.log.push_back(record);
    if (on_epoch && !on_epoch(record)) break;
  }
  result.checkpoint = std::move(state);
  return result;
}

Matrix infer_scene(const PointCloud& scene, const Checkpoint& checkpoint, AnchorTable table) {
  if (checkpoint.projection.rows() != table.embedding_dim()) {
    throw DimensionError("infer_scene: checkpoint projection expects embedding dimension " +
                         std::to_string(checkpoint.projection.rows()) + ", table has " +
                         std::to_string(table.embedding_dim()));
  }
  table.set_projection(checkpoint.projection);
  const Matrix features = encoder_forward(scene, checkpoint.encoder);
  const Matrix projected = checkpoint.bank ? dcr_project(features, *checkpoint.bank) : features;
  return class_probs(projected, table, checkpoint.temperature);
}

}  // namespace cadscene
