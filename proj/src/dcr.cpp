#include "cadscene/dcr.hpp"

#include <cmath>
#include <string>

#include "cadscene/errors.hpp"

namespace cadscene {

namespace {

void softmax_rows_inplace(Matrix& logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

void check_features(const Matrix& features, const PrototypeBank& bank) {
  if (features.cols() != bank.dim()) {
    throw DimensionError("dcr: feature width " + std::to_string(features.cols()) +
                         " but prototypes have dimension " + std::to_string(bank.dim()));
  }
  if (!features.allFinite()) throw InvalidArgument("dcr: non-finite input feature");
}

}  // namespace

PrototypeBank PrototypeBank::initialize(int count, int dim, int attention_dim, double lambda,
                                        Rng& rng) {
  if (count < 1 || dim < 1 || attention_dim < 1) {
    throw InvalidArgument("prototype bank: sizes must be positive");
  }
  PrototypeBank bank;
  bank.lambda = lambda;
  bank.prototypes.resize(count, dim);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index k = 0; k < count; ++k) {
    for (Eigen::Index d = 0; d < dim; ++d) bank.prototypes(k, d) = gauss(rng);
    bank.prototypes.row(k).normalize();
  }
  const double bound = std::sqrt(1.0 / dim);
  std::uniform_real_distribution<double> uniform(-bound, bound);
  bank.key.resize(dim, attention_dim);
  bank.query.resize(dim, attention_dim);
  for (Eigen::Index i = 0; i < bank.key.size(); ++i) bank.key.data()[i] = uniform(rng);
  for (Eigen::Index i = 0; i < bank.query.size(); ++i) bank.query.data()[i] = uniform(rng);
  bank.validate();
  return bank;
}

PrototypeBank PrototypeBank::zeros_like(const PrototypeBank& shape) {
  PrototypeBank bank;
  bank.lambda = shape.lambda;
  bank.prototypes = Matrix::Zero(shape.prototypes.rows(), shape.prototypes.cols());
  bank.key = Matrix::Zero(shape.key.rows(), shape.key.cols());
  bank.query = Matrix::Zero(shape.query.rows(), shape.query.cols());
  return bank;
}

void PrototypeBank::check_shapes() const {
  if (count() < 1 || dim() < 1) throw DimensionError("prototype bank: empty prototypes");
  if (key.rows() != dim() || query.rows() != dim() || key.cols() != query.cols() ||
      key.cols() < 1) {
    throw DimensionError("prototype bank: key/query must both be D x d_a");
  }
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw InvalidArgument("prototype bank: lambda must be finite and non-negative");
  }
}

void PrototypeBank::validate() const {
  check_shapes();
  if (count() <= dim()) {
    throw InvalidArgument("prototype bank: need more prototypes (" + std::to_string(count()) +
                          ") than feature dimensions (" + std::to_string(dim()) + ")");
  }
  if (!(lambda > 0.0)) throw InvalidArgument("prototype bank: lambda must be positive");
  if (!prototypes.allFinite() || !key.allFinite() || !query.allFinite()) {
    throw InvalidArgument("prototype bank: non-finite value");
  }
}

std::vector<std::span<double>> PrototypeBank::tensors() {
  return {{prototypes.data(), static_cast<std::size_t>(prototypes.size())},
          {key.data(), static_cast<std::size_t>(key.size())},
          {query.data(), static_cast<std::size_t>(query.size())}};
}

std::vector<std::span<const double>> PrototypeBank::tensors() const {
  return {{prototypes.data(), static_cast<std::size_t>(prototypes.size())},
          {key.data(), static_cast<std::size_t>(key.size())},
          {query.data(), static_cast<std::size_t>(query.size())}};
}

Vector stable_softmax(const Vector& logits) {
  Matrix row = logits.transpose();
  softmax_rows_inplace(row);
  return row.row(0).transpose();
}

Matrix dcr_coefficients(const Matrix& features, const PrototypeBank& bank) {
  bank.check_shapes();
  check_features(features, bank);
  Matrix logits = bank.lambda * (features * bank.key) * (bank.prototypes * bank.query).transpose();
  softmax_rows_inplace(logits);
  return logits;
}

Vector coefficients(const Vector& x, const PrototypeBank& bank) {
  return dcr_coefficients(Matrix(x.transpose()), bank).row(0).transpose();
}

Vector project(const Vector& x, const PrototypeBank& bank) {
  return dcr_project(Matrix(x.transpose()), bank).row(0).transpose();
}

Matrix dcr_project(const Matrix& features, const PrototypeBank& bank, DcrTape* tape) {
  bank.check_shapes();
  check_features(features, bank);
  Matrix keys = features * bank.key;
  Matrix queries = bank.prototypes * bank.query;
  Matrix coeffs = bank.lambda * keys * queries.transpose();
  softmax_rows_inplace(coeffs);
  Matrix projected = coeffs * bank.prototypes;
  if (tape) {
    tape->features = features;
    tape->keys = std::move(keys);
    tape->queries = std::move(queries);
    tape->coefficients = std::move(coeffs);
    tape->recorded = true;
  }
  return projected;
}

DcrGradients dcr_backward(const DcrTape& tape, const PrototypeBank& bank, const Matrix& upstream) {
  if (!tape.recorded) throw StateError("dcr_backward: no cached forward pass");
  if (upstream.rows() != tape.features.rows() || upstream.cols() != bank.dim()) {
    throw DimensionError("dcr_backward: upstream gradient has wrong shape");
  }
  const Matrix& a = tape.coefficients;

  DcrGradients out;
  out.bank = PrototypeBank::zeros_like(bank);

  // Value path: projected = a P.
  out.bank.prototypes.noalias() = a.transpose() * upstream;
  const Matrix coeff_grad = upstream * bank.prototypes.transpose();

  // Softmax Jacobian, row by row: ds = a * (da - <a, da>).
  const Vector inner = (a.array() * coeff_grad.array()).rowwise().sum();
  const Matrix logit_grad = (a.array() * (coeff_grad.colwise() - inner).array()).matrix();

  // logits = lambda * keys queries^T.
  const Matrix key_grad = bank.lambda * logit_grad * tape.queries;                 // N x d_a
  const Matrix query_grad = bank.lambda * logit_grad.transpose() * tape.keys;      // K x d_a

  out.features.noalias() = key_grad * bank.key.transpose();
  out.bank.key.noalias() = tape.features.transpose() * key_grad;
  out.bank.prototypes.noalias() += query_grad * bank.query.transpose();
  out.bank.query.noalias() = bank.prototypes.transpose() * query_grad;
  return out;
}

}  // namespace cadscene
