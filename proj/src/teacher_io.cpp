#include "ipakit/teacher_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <Eigen/Core>

#include "binary_io.hpp"
#include "ipakit/error.hpp"
#include "ipakit/random.hpp"

namespace ipakit {

using detail::get_u32;
using detail::put_f32;
using detail::put_u32;

namespace {

constexpr char kMagic[4] = {'T', 'E', 'B', '1'};
constexpr std::uint32_t kMaxTextBytes = 1u << 24;

}  // namespace

void TeacherTable::add(std::string text, std::vector<float> vector) {
  if (vector.size() != dim_)
    throw DataError("teacher vector for '" + text + "' has " + std::to_string(vector.size()) +
                    " components, table dim is " + std::to_string(dim_));
  latest_[text] = records_.size();
  records_.push_back({std::move(text), std::move(vector)});
}

const std::vector<float>* TeacherTable::find(std::string_view text) const {
  auto it = latest_.find(std::string(text));
  return it == latest_.end() ? nullptr : &records_[it->second].vector;
}

TeacherTable read_teb(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw DataError("TEB1: bad magic");
  std::uint32_t count = 0, dim = 0;
  if (!get_u32(in, count) || !get_u32(in, dim)) throw DataError("TEB1: truncated header");
  TeacherTable table(dim);
  for (std::uint32_t r = 0; r < count; ++r) {
    const auto where = "TEB1 record " + std::to_string(r) + ": ";
    std::uint32_t len = 0;
    if (!get_u32(in, len)) throw DataError(where + "truncated record");
    if (len > kMaxTextBytes) throw DataError(where + "text length " + std::to_string(len) + " too large");
    std::string text(len, '\0');
    if (len > 0 && !in.read(text.data(), len)) throw DataError(where + "truncated record");
    std::vector<float> v(dim);
    for (auto& x : v) {
      if (!detail::get_f32(in, x)) throw DataError(where + "truncated record");
      if (!std::isfinite(x)) throw DataError(where + "non-finite value");
    }
    table.add(std::move(text), std::move(v));
  }
  return table;
}

std::size_t write_teb(const TeacherTable& table, std::ostream& out) {
  out.write(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(table.size()));
  put_u32(out, table.dim());
  std::size_t bytes = 12;
  for (const auto& r : table.records()) {
    for (float x : r.vector)
      if (!std::isfinite(x)) throw DataError("TEB1: non-finite value for '" + r.text + "'");
    put_u32(out, static_cast<std::uint32_t>(r.text.size()));
    out.write(r.text.data(), static_cast<std::streamsize>(r.text.size()));
    for (float x : r.vector) put_f32(out, x);
    bytes += 4 + r.text.size() + 4 * r.vector.size();
  }
  if (!out) throw DataError("TEB1: write failed");
  return bytes;
}

TeacherTable read_teb_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  try {
    return read_teb(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_teb_file(const TeacherTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  write_teb(table, out);
}

namespace {

// murmur3 finalizer of the byte pair, low 8 bits
std::uint32_t bigram_bin(std::uint32_t prev, std::uint32_t next) {
  std::uint32_t x = (prev << 8) | next;
  x ^= x >> 16;
  x *= 0x85EBCA6Bu;
  x ^= x >> 13;
  x *= 0xC2B2AE35u;
  x ^= x >> 16;
  return x & 0xFFu;
}

}  // namespace

std::vector<float> bigram_histogram(std::string_view text) {
  std::vector<float> h(256, 0.0f);
  std::uint32_t prev = 0x02;
  auto bump = [&](std::uint32_t next) {
    h[bigram_bin(prev, next)] += 1.0f;
    prev = next;
  };
  for (char c : text) bump(static_cast<unsigned char>(c));
  bump(0x03);
  return h;
}

TeacherTable synthetic_teacher(const std::vector<std::string>& texts, std::uint32_t dim, std::uint64_t seed) {
  Rng rng(seed);
  const Eigen::MatrixXd a = random_normal<double>(dim, 256, 0.25, rng);
  TeacherTable table(dim);
  for (const auto& text : texts) {
    const auto h = bigram_histogram(text);
    const Eigen::VectorXd hv = Eigen::Map<const Eigen::VectorXf>(h.data(), 256).cast<double>();
    const Eigen::VectorXd y = (a * hv).array().tanh();
    std::vector<float> v(dim);
    for (std::uint32_t i = 0; i < dim; ++i) v[i] = static_cast<float>(y(i));
    table.add(text, std::move(v));
  }
  return table;
}

}  // namespace ipakit
