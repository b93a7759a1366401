#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ipakit {

struct TeacherRecord {
  std::string text;
  std::vector<float> vector;

  friend bool operator==(const TeacherRecord&, const TeacherRecord&) = default;
};

/// Text -> teacher_dim vectors, standing in for a frozen encoder. Also used
/// for image-embedding tables keyed "label/index".
class TeacherTable {
 public:
  explicit TeacherTable(std::uint32_t dim = 0) : dim_(dim) {}

  std::uint32_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return records_.size(); }
  const std::vector<TeacherRecord>& records() const noexcept { return records_; }

  /// Throws DataError on a dimension mismatch.
  void add(std::string text, std::vector<float> vector);

  /// Latest record with this text, or nullptr.
  const std::vector<float>* find(std::string_view text) const;

  friend bool operator==(const TeacherTable& a, const TeacherTable& b) {
    return a.dim_ == b.dim_ && a.records_ == b.records_;
  }

 private:
  std::uint32_t dim_;
  std::vector<TeacherRecord> records_;
  std::unordered_map<std::string, std::size_t> latest_;
};

// TEB1 layout, little-endian: "TEB1", u32 count, u32 dim, then per record
// u32 byte length, UTF-8 text, dim x f32.
TeacherTable read_teb(std::istream& in);
std::size_t write_teb(const TeacherTable& table, std::ostream& out);

TeacherTable read_teb_file(const std::string& path);
void write_teb_file(const TeacherTable& table, const std::string& path);

/// Deterministic stand-in teacher: tanh(A h(text)) with h the 256-bin
/// byte-bigram histogram of the text (bounded by 0x02/0x03 markers, each
/// bigram hashed to a bin by the murmur3 finalizer) and A a
/// dim x 256 matrix of Normal(0, 1/16) draws from `seed`.
TeacherTable synthetic_teacher(const std::vector<std::string>& texts, std::uint32_t dim, std::uint64_t seed);

/// The bigram histogram used by synthetic_teacher.
std::vector<float> bigram_histogram(std::string_view text);

}  // namespace ipakit
