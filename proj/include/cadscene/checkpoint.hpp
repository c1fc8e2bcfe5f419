#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cadscene/dcr.hpp"
#include "cadscene/lang_anchor.hpp"
#include "cadscene/sparse_encoder.hpp"

namespace cadscene {

/// Everything needed to run inference except the frozen word embeddings.
struct Checkpoint {
  EncoderParams encoder;
  std::optional<PrototypeBank> bank;  // absent when the projection stage is disabled
  Matrix projection;                  // E x D anchor projection
  AnchorOptions anchor_options;
  double temperature = 1.0;           // inference softmax temperature
  std::vector<std::string> class_names;

  int feature_dim() const { return encoder.output_width(); }
  /// Shapes agree across encoder, bank and projection.
  void validate() const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Little-endian binary container:
///   "CSCKPT\0\0" | u32 version | f64 voxel_size | u32 layers
///   per layer: u32 in | u32 out | 27*in*out f64 weights | out f64 bias
///   u8 has_bank [u32 K | u32 D | u32 d_a | f64 lambda | K*D | D*d_a | D*d_a]
///   u32 E | u32 D | E*D projection | u8 normalize | u8 multi_token | f64 temperature
///   u32 classes, each u32 length + bytes
/// Matrices are row-major. Round trips are bit-exact.
void write_checkpoint(std::ostream& out, const Checkpoint& ck);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

bool bitwise_equal(const Checkpoint& a, const Checkpoint& b);

}  // namespace cadscene
