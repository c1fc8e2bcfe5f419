#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cadscene/geometry.hpp"
#include "cadscene/linalg.hpp"

namespace cadscene {

enum class MultiTokenMode { kAverage, kConcatenate };

struct AnchorOptions {
  MultiTokenMode multi_token = MultiTokenMode::kAverage;
  // Rescale each projected anchor to unit length.
  bool normalize = false;
};

/// Frozen per-class word embeddings and the learned map into feature space.
/// anchor(c) = W_proj^T embedding[c]. Only the projection is trainable.
class AnchorTable {
 public:
  AnchorTable() = default;
  AnchorTable(std::vector<std::string> class_names, Matrix embeddings, AnchorOptions options = {});

  std::size_t class_count() const { return class_names_.size(); }
  const std::vector<std::string>& class_names() const { return class_names_; }
  int embedding_dim() const { return static_cast<int>(embeddings_.cols()); }
  int feature_dim() const { return static_cast<int>(projection_.cols()); }
  const Matrix& embeddings() const { return embeddings_; }
  const Matrix& projection() const { return projection_; }
  const AnchorOptions& options() const { return options_; }

  /// Identity when E == D, otherwise uniform in +-sqrt(1/E).
  void init_projection(int feature_dim, Rng& rng);
  /// Replaces W_proj (E x D) and refreshes the projected anchors.
  void set_projection(Matrix projection);
  /// Mutable view for in-place optimizer steps; call refresh() afterwards.
  Matrix& projection_mut() { return projection_; }
  void refresh();

  /// C x D matrix of projected anchors.
  const Matrix& anchors() const { return projected_; }
  Vector anchor(int class_id) const;

  /// Zero-shot extension. Existing anchors are unchanged. Returns the new id.
  int add_class(const std::string& name, const Vector& embedding);
  int class_id(const std::string& name) const;

  /// dLoss/dW_proj for a gradient on the projected anchors (C x D).
  Matrix projection_gradient(const Matrix& anchor_grad) const;

 private:
  std::vector<std::string> class_names_;
  Matrix embeddings_;  // C x E
  Matrix projection_;  // E x D
  Matrix projected_;   // C x D
  AnchorOptions options_;
};

/// Splits a class name into embedding tokens (whitespace or '_').
std::vector<std::string> class_tokens(const std::string& name);

/// Reads GloVe-style "token v1 ... vE" lines and builds one embedding per
/// class name. Multi-token names are averaged (or concatenated and
/// zero-padded to the longest name). The projection starts as identity.
AnchorTable load_embeddings(const std::filesystem::path& path,
                            const std::vector<std::string>& class_names,
                            const AnchorOptions& options = {});
AnchorTable load_embeddings(std::istream& in, const std::vector<std::string>& class_names,
                            const AnchorOptions& options = {},
                            const std::string& source_name = "<stream>");

/// Class list file: one name per line, line index = class id.
std::vector<std::string> read_class_list(const std::filesystem::path& path);

}  // namespace cadscene
