#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "ipakit/student.hpp"

namespace ipakit {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// MDL1 layout, little-endian: "MDL1", u32 version, u32 config fields (mode, N,
// V, d_model, layers, heads, ffn_mult, max_len, teacher_dim), then named
// tensors until end of stream: u32 name length, name, u32 rank, u32 dims,
// f32 data in row-major order.
void save_checkpoint(const StudentModel<float>& model, std::ostream& out);

/// Throws DataError on bad magic, version mismatch, a table whose sizes differ
/// from the stored N and V, or any missing, unknown or misshapen tensor.
StudentModel<float> load_checkpoint(std::istream& in, const AttributeTable& table);

void save_checkpoint_file(const StudentModel<float>& model, const std::string& path);
StudentModel<float> load_checkpoint_file(const std::string& path, const AttributeTable& table);

}  // namespace ipakit
