#include "ipakit/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "binary_io.hpp"
#include "ipakit/error.hpp"

namespace ipakit {

using detail::get_u32;
using detail::put_u32;

namespace {

constexpr char kMagic[4] = {'M', 'D', 'L', '1'};
constexpr std::uint32_t kMaxNameBytes = 256;

std::uint32_t read_u32(std::istream& in, const char* what) {
  std::uint32_t v = 0;
  if (!get_u32(in, v)) throw DataError(std::string("checkpoint: truncated ") + what);
  return v;
}

}  // namespace

void save_checkpoint(const StudentModel<float>& model, std::ostream& out) {
  const auto& c = model.config();
  out.write(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  for (int v : {static_cast<int>(c.mode), model.attribute_count(), model.vocab_size(), c.d_model, c.layers,
                c.heads, c.ffn_mult, c.max_len, c.teacher_dim})
    put_u32(out, static_cast<std::uint32_t>(v));
  for (const auto& [name, m] : model.params().named()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, 2);
    put_u32(out, static_cast<std::uint32_t>(m->rows()));
    put_u32(out, static_cast<std::uint32_t>(m->cols()));
    for (Eigen::Index r = 0; r < m->rows(); ++r)
      for (Eigen::Index col = 0; col < m->cols(); ++col) detail::put_f32(out, (*m)(r, col));
  }
  if (!out) throw DataError("checkpoint: write failed");
}

StudentModel<float> load_checkpoint(std::istream& in, const AttributeTable& table) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw DataError("checkpoint: bad magic");
  const auto version = read_u32(in, "header");
  if (version != kCheckpointVersion)
    throw DataError("checkpoint: version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  std::uint32_t f[9];
  for (auto& v : f) v = read_u32(in, "config block");
  if (f[0] > static_cast<std::uint32_t>(EmbeddingMode::Baseline)) throw DataError("checkpoint: unknown mode");

  StudentConfig config;
  config.mode = static_cast<EmbeddingMode>(f[0]);
  config.d_model = static_cast<int>(f[3]);
  config.layers = static_cast<int>(f[4]);
  config.heads = static_cast<int>(f[5]);
  config.ffn_mult = static_cast<int>(f[6]);
  config.max_len = static_cast<int>(f[7]);
  config.teacher_dim = static_cast<int>(f[8]);
  config.validate();

  StudentModel<float> model(config, table);
  if (static_cast<int>(f[1]) != model.attribute_count() || static_cast<int>(f[2]) != model.vocab_size())
    throw DataError("checkpoint: stored N=" + std::to_string(f[1]) + ", V=" + std::to_string(f[2]) +
                    " do not match the attribute table (N=" + std::to_string(model.attribute_count()) +
                    ", V=" + std::to_string(model.vocab_size()) + ")");

  std::map<std::string, Eigen::MatrixXf> tensors;
  while (in.peek() != std::char_traits<char>::eof()) {
    const auto len = read_u32(in, "tensor name");
    if (len == 0 || len > kMaxNameBytes) throw DataError("checkpoint: bad tensor name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw DataError("checkpoint: truncated tensor name");
    const auto rank = read_u32(in, "tensor rank");
    if (rank < 1 || rank > 2) throw DataError("checkpoint: tensor " + name + " has unsupported rank");
    std::uint32_t dims[2] = {1, 1};
    for (std::uint32_t k = 0; k < rank; ++k) dims[2 - rank + k] = read_u32(in, "tensor dims");
    const auto* expected = [&]() -> const Eigen::MatrixXf* {
      for (const auto& [n, m] : model.params().named())
        if (n == name) return m;
      return nullptr;
    }();
    if (!expected) throw DataError("checkpoint: unknown tensor " + name);
    if (expected->rows() != dims[0] || expected->cols() != dims[1])
      throw DataError("checkpoint: tensor " + name + " is " + std::to_string(dims[0]) + "x" +
                      std::to_string(dims[1]) + ", config implies " + std::to_string(expected->rows()) + "x" +
                      std::to_string(expected->cols()));
    Eigen::MatrixXf m(dims[0], dims[1]);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        if (!detail::get_f32(in, m(r, c))) throw DataError("checkpoint: truncated tensor " + name);
    if (!m.allFinite()) throw DataError("checkpoint: tensor " + name + " has non-finite values");
    if (!tensors.emplace(name, std::move(m)).second) throw DataError("checkpoint: duplicate tensor " + name);
  }
  for (auto& [name, m] : model.params().named()) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError("checkpoint: missing tensor " + name);
    *m = std::move(it->second);
  }
  return model;
}

void save_checkpoint_file(const StudentModel<float>& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  save_checkpoint(model, out);
}

StudentModel<float> load_checkpoint_file(const std::string& path, const AttributeTable& table) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  try {
    return load_checkpoint(in, table);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace ipakit
