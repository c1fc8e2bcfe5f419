#include "cadscene/lang_anchor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cadscene/errors.hpp"

namespace cadscene {

AnchorTable::AnchorTable(std::vector<std::string> class_names, Matrix embeddings,
                         AnchorOptions options)
    : class_names_(std::move(class_names)), embeddings_(std::move(embeddings)), options_(options) {
  if (static_cast<Eigen::Index>(class_names_.size()) != embeddings_.rows()) {
    throw DimensionError("anchor table: one embedding row per class required");
  }
  std::set<std::string> seen;
  for (const auto& name : class_names_) {
    if (!seen.insert(name).second) throw InvalidArgument("anchor table: duplicate class " + name);
  }
  if (!embeddings_.allFinite()) throw InvalidArgument("anchor table: non-finite embedding");
  projection_ = Matrix::Identity(embeddings_.cols(), embeddings_.cols());
  refresh();
}

void AnchorTable::init_projection(int feature_dim, Rng& rng) {
  if (feature_dim < 1) throw InvalidArgument("anchor table: feature_dim must be positive");
  if (feature_dim == embedding_dim()) {
    set_projection(Matrix::Identity(feature_dim, feature_dim));
    return;
  }
  const double bound = std::sqrt(1.0 / std::max(1, embedding_dim()));
  std::uniform_real_distribution<double> init(-bound, bound);
  Matrix w(embedding_dim(), feature_dim);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = init(rng);
  set_projection(std::move(w));
}

void AnchorTable::set_projection(Matrix projection) {
  if (projection.rows() != embedding_dim()) {
    throw DimensionError("anchor table: projection must have " + std::to_string(embedding_dim()) +
                         " rows");
  }
  projection_ = std::move(projection);
  refresh();
}

void AnchorTable::refresh() {
  projected_ = embeddings_ * projection_;
  if (options_.normalize) {
    for (Eigen::Index c = 0; c < projected_.rows(); ++c) {
      const double norm = projected_.row(c).norm();
      if (norm > 0.0) projected_.row(c) /= norm;
    }
  }
}

Vector AnchorTable::anchor(int class_id) const {
  if (class_id < 0 || class_id >= static_cast<int>(class_count())) {
    throw InvalidArgument("anchor table: class id " + std::to_string(class_id) + " out of range");
  }
  return projected_.row(class_id).transpose();
}

int AnchorTable::add_class(const std::string& name, const Vector& embedding) {
  if (std::find(class_names_.begin(), class_names_.end(), name) != class_names_.end()) {
    throw InvalidArgument("anchor table: duplicate class " + name);
  }
  if (embedding.size() != embedding_dim()) {
    throw DimensionError("anchor table: new embedding has dimension " +
                         std::to_string(embedding.size()) + ", expected " +
                         std::to_string(embedding_dim()));
  }
  class_names_.push_back(name);
  embeddings_.conservativeResize(embeddings_.rows() + 1, Eigen::NoChange);
  embeddings_.row(embeddings_.rows() - 1) = embedding.transpose();

  Vector h = projection_.transpose() * embedding;
  if (options_.normalize && h.norm() > 0.0) h.normalize();
  projected_.conservativeResize(projected_.rows() + 1, Eigen::NoChange);
  projected_.row(projected_.rows() - 1) = h.transpose();
  return static_cast<int>(class_names_.size()) - 1;
}

int AnchorTable::class_id(const std::string& name) const {
  auto it = std::find(class_names_.begin(), class_names_.end(), name);
  if (it == class_names_.end()) throw InvalidArgument("anchor table: unknown class " + name);
  return static_cast<int>(it - class_names_.begin());
}

Matrix AnchorTable::projection_gradient(const Matrix& anchor_grad) const {
  if (anchor_grad.rows() != projected_.rows() || anchor_grad.cols() != projected_.cols()) {
    throw DimensionError("anchor table: anchor gradient has wrong shape");
  }
  if (!options_.normalize) return embeddings_.transpose() * anchor_grad;

  // h = u / |u|  =>  du = (dh - h <h, dh>) / |u|
  const Matrix raw = embeddings_ * projection_;
  Matrix raw_grad(anchor_grad.rows(), anchor_grad.cols());
  for (Eigen::Index c = 0; c < raw.rows(); ++c) {
    const double norm = raw.row(c).norm();
    if (norm == 0.0) {
      raw_grad.row(c).setZero();
      continue;
    }
    const auto h = projected_.row(c);
    raw_grad.row(c) = (anchor_grad.row(c) - h * h.dot(anchor_grad.row(c))) / norm;
  }
  return embeddings_.transpose() * raw_grad;
}

std::vector<std::string> class_tokens(const std::string& name) {
  std::string spaced = name;
  std::replace(spaced.begin(), spaced.end(), '_', ' ');
  std::istringstream ss(spaced);
  std::vector<std::string> tokens;
  for (std::string t; ss >> t;) tokens.push_back(t);
  return tokens;
}

AnchorTable load_embeddings(std::istream& in, const std::vector<std::string>& class_names,
                            const AnchorOptions& options, const std::string& source_name) {
  if (class_names.empty()) throw InvalidArgument("load_embeddings: empty class list");
  std::set<std::string> wanted;
  std::vector<std::vector<std::string>> tokens_per_class;
  for (const auto& name : class_names) {
    auto tokens = class_tokens(name);
    if (tokens.empty()) throw InvalidArgument("load_embeddings: blank class name");
    wanted.insert(tokens.begin(), tokens.end());
    tokens_per_class.push_back(std::move(tokens));
  }

  std::map<std::string, Vector> found;
  int dim = -1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    std::vector<double> values;
    for (double v; ss >> v;) values.push_back(v);
    if (!ss.eof()) {
      // Trailing garbage after the numbers.
      std::string rest;
      ss.clear();
      if (ss >> rest) throw ParseError(source_name, line_no, "non-numeric embedding value");
    }
    if (values.empty()) throw ParseError(source_name, line_no, "token without values");
    if (dim < 0) dim = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != dim) {
      throw ParseError(source_name, line_no,
                       "embedding dimension " + std::to_string(values.size()) +
                           " differs from " + std::to_string(dim));
    }
    if (wanted.contains(token) && !found.contains(token)) {
      found.emplace(token, Eigen::Map<Vector>(values.data(), dim));
    }
  }
  if (dim < 0) throw ParseError(source_name, line_no, "no embeddings in file");

  std::size_t max_tokens = 1;
  for (const auto& tokens : tokens_per_class) max_tokens = std::max(max_tokens, tokens.size());
  const int width =
      options.multi_token == MultiTokenMode::kAverage ? dim : dim * static_cast<int>(max_tokens);

  Matrix embeddings = Matrix::Zero(static_cast<Eigen::Index>(class_names.size()), width);
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    const auto& tokens = tokens_per_class[c];
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      auto it = found.find(tokens[t]);
      if (it == found.end()) {
        throw InvalidArgument("load_embeddings: token '" + tokens[t] + "' of class '" +
                              class_names[c] + "' not found in " + source_name);
      }
      if (options.multi_token == MultiTokenMode::kAverage) {
        embeddings.row(static_cast<Eigen::Index>(c)) +=
            it->second.transpose() / static_cast<double>(tokens.size());
      } else {
        embeddings.block(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t) * dim, 1, dim) =
            it->second.transpose();
      }
    }
  }
  return AnchorTable(class_names, std::move(embeddings), options);
}

AnchorTable load_embeddings(const std::filesystem::path& path,
                            const std::vector<std::string>& class_names,
                            const AnchorOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file " + path.string());
  return load_embeddings(in, class_names, options, path.string());
}

std::vector<std::string> read_class_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open class list " + path.string());
  std::vector<std::string> names;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    names.push_back(line.substr(first, last - first + 1));
  }
  if (names.empty()) throw ParseError(path.string(), line_no, "class list is empty");
  return names;
}

}  // namespace cadscene
