#include "cadscene/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cadscene/errors.hpp"

namespace cadscene {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'C', 'S', 'C', 'K', 'P', 'T', '\0', '\0'};
// Guards against allocating absurd sizes from a corrupt header.
constexpr std::uint32_t kMaxExtent = 1u << 20;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename T>
  void put(T value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void put_doubles(const double* data, std::size_t n) {
    out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  }
  void put_matrix(const Matrix& m) { put_doubles(m.data(), static_cast<std::size_t>(m.size())); }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  template <typename T>
  T get() {
    T value;
    read(&value, sizeof(T));
    return value;
  }
  std::uint32_t extent(const char* what) {
    const auto v = get<std::uint32_t>();
    if (v > kMaxExtent) throw IoError(std::string("checkpoint: implausible ") + what);
    return v;
  }
  Matrix matrix(std::uint32_t rows, std::uint32_t cols) {
    Matrix m(rows, cols);
    read(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
    return m;
  }
  void read(void* dst, std::size_t bytes) {
    in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(bytes));
    if (in_.gcount() != static_cast<std::streamsize>(bytes)) {
      throw IoError("checkpoint: truncated file");
    }
  }

 private:
  std::istream& in_;
};

}  // namespace

void Checkpoint::validate() const {
  encoder.validate();
  const int d = feature_dim();
  if (bank) {
    bank->validate();
    if (bank->dim() != d) throw DimensionError("checkpoint: prototype dimension differs from encoder output");
  }
  if (projection.cols() != d) {
    throw DimensionError("checkpoint: anchor projection has " + std::to_string(projection.cols()) +
                         " columns, encoder outputs " + std::to_string(d));
  }
  if (!(temperature > 0.0)) throw InvalidArgument("checkpoint: temperature must be positive");
}

void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  Writer w(out);
  out.write(kMagic, sizeof(kMagic));
  w.put(kCheckpointVersion);
  w.put(ck.encoder.voxel_size);
  w.put(static_cast<std::uint32_t>(ck.encoder.layers.size()));
  for (const auto& layer : ck.encoder.layers) {
    w.put(static_cast<std::uint32_t>(layer.in_width()));
    w.put(static_cast<std::uint32_t>(layer.out_width()));
    for (const auto& slice : layer.weights) w.put_matrix(slice);
    w.put_doubles(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  }
  w.put(static_cast<std::uint8_t>(ck.bank.has_value()));
  if (ck.bank) {
    w.put(static_cast<std::uint32_t>(ck.bank->count()));
    w.put(static_cast<std::uint32_t>(ck.bank->dim()));
    w.put(static_cast<std::uint32_t>(ck.bank->attention_dim()));
    w.put(ck.bank->lambda);
    w.put_matrix(ck.bank->prototypes);
    w.put_matrix(ck.bank->key);
    w.put_matrix(ck.bank->query);
  }
  w.put(static_cast<std::uint32_t>(ck.projection.rows()));
  w.put(static_cast<std::uint32_t>(ck.projection.cols()));
  w.put_matrix(ck.projection);
  w.put(static_cast<std::uint8_t>(ck.anchor_options.normalize));
  w.put(static_cast<std::uint8_t>(ck.anchor_options.multi_token));
  w.put(ck.temperature);
  w.put(static_cast<std::uint32_t>(ck.class_names.size()));
  for (const auto& name : ck.class_names) {
    w.put(static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
  }
  if (!out) throw IoError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  Reader r(in);
  char magic[8];
  r.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw IoError("checkpoint: bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  }

  Checkpoint ck;
  ck.encoder.voxel_size = r.get<double>();
  const auto layers = r.extent("layer count");
  for (std::uint32_t l = 0; l < layers; ++l) {
    const auto in_w = r.extent("layer width");
    const auto out_w = r.extent("layer width");
    ConvLayer layer;
    for (int o = 0; o < kKernelVolume; ++o) layer.weights.push_back(r.matrix(in_w, out_w));
    layer.bias.resize(out_w);
    r.read(layer.bias.data(), out_w * sizeof(double));
    ck.encoder.layers.push_back(std::move(layer));
  }
  if (r.get<std::uint8_t>() != 0) {
    PrototypeBank bank;
    const auto k = r.extent("prototype count");
    const auto d = r.extent("prototype dimension");
    const auto da = r.extent("attention dimension");
    bank.lambda = r.get<double>();
    bank.prototypes = r.matrix(k, d);
    bank.key = r.matrix(d, da);
    bank.query = r.matrix(d, da);
    ck.bank = std::move(bank);
  }
  const auto e = r.extent("embedding dimension");
  const auto d = r.extent("feature dimension");
  ck.projection = r.matrix(e, d);
  ck.anchor_options.normalize = r.get<std::uint8_t>() != 0;
  const auto mode = r.get<std::uint8_t>();
  if (mode > static_cast<std::uint8_t>(MultiTokenMode::kConcatenate)) {
    throw IoError("checkpoint: unknown multi-token mode");
  }
  ck.anchor_options.multi_token = static_cast<MultiTokenMode>(mode);
  ck.temperature = r.get<double>();
  const auto classes = r.extent("class count");
  for (std::uint32_t c = 0; c < classes; ++c) {
    const auto len = r.extent("class name length");
    std::string name(len, '\0');
    r.read(name.data(), len);
    ck.class_names.push_back(std::move(name));
  }
  ck.validate();
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  write_checkpoint(out, ck);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

bool bitwise_equal(const Checkpoint& a, const Checkpoint& b) {
  std::ostringstream sa, sb;
  write_checkpoint(sa, a);
  write_checkpoint(sb, b);
  return sa.str() == sb.str();
}

}  // namespace cadscene
