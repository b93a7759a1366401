#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ipakit::cli {

std::string sha256_file(const std::string& path);

/// Provenance record written next to every output as <output>.manifest.tsv.
struct RunManifest {
  std::string command;
  std::string version;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> flags;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, sha256

  void add_input(const std::string& path) { inputs.emplace_back(path, sha256_file(path)); }
  void write_next_to(const std::string& output) const;
};

}  // namespace ipakit::cli
