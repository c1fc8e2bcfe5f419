#pragma once

#include <span>
#include <vector>

#include "cadscene/geometry.hpp"
#include "cadscene/linalg.hpp"

namespace cadscene {

/// Learnable support points of the feature convex hull plus the key/query
/// maps that score a feature against each of them.
///
/// For a feature x the coefficients are
///   a = softmax_k( lambda * (W_key^T x) . (W_query^T p_k) )
/// and the projected feature is sum_k a_k p_k, so it always lies in the
/// convex hull of the prototypes.
struct PrototypeBank {
  Matrix prototypes;  // K x D
  Matrix key;         // D x d_a, applied to point features
  Matrix query;       // D x d_a, applied to prototypes
  double lambda = 0.5;

  int count() const { return static_cast<int>(prototypes.rows()); }
  int dim() const { return static_cast<int>(prototypes.cols()); }
  int attention_dim() const { return static_cast<int>(key.cols()); }

  /// Gaussian prototypes rescaled to unit norm; key/query uniform in
  /// +-sqrt(1/D). Enforces K > D and lambda > 0.
  static PrototypeBank initialize(int count, int dim, int attention_dim, double lambda, Rng& rng);
  static PrototypeBank zeros_like(const PrototypeBank& shape);

  /// Full construction-time invariants: K > D, lambda > 0, finite values,
  /// consistent shapes.
  void validate() const;
  /// Shape and finiteness only; what the math operations require.
  void check_shapes() const;

  /// prototypes, key, query (lambda is a fixed hyperparameter).
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
};

/// Numerically stable softmax (max-subtraction).
Vector stable_softmax(const Vector& logits);

/// Row-wise coefficients for N features (N x D) -> N x K. Softmax uses
/// max-subtraction.
Matrix dcr_coefficients(const Matrix& features, const PrototypeBank& bank);
Vector coefficients(const Vector& x, const PrototypeBank& bank);
Vector project(const Vector& x, const PrototypeBank& bank);

struct DcrTape {
  Matrix features;      // N x D inputs
  Matrix keys;          // N x d_a
  Matrix queries;       // K x d_a
  Matrix coefficients;  // N x K
  bool recorded = false;
};

/// Projects every row of `features`. Fills `tape` when given.
Matrix dcr_project(const Matrix& features, const PrototypeBank& bank, DcrTape* tape = nullptr);

struct DcrGradients {
  Matrix features;      // N x D
  PrototypeBank bank;   // gradients for prototypes, key, query; lambda unused
};

/// Reverse pass through the softmax-weighted sum. The prototype gradient
/// collects both the value path and the query-logit path.
DcrGradients dcr_backward(const DcrTape& tape, const PrototypeBank& bank, const Matrix& upstream);

}  // namespace cadscene
