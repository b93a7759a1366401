#pragma once

#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "ipakit/error.hpp"
#include "ipakit/lexicon.hpp"

namespace ipakit::test {

inline std::string data_path(std::string_view name) {
  return std::string(IPAKIT_TEST_DATA_DIR) + "/" + std::string(name);
}

inline std::ifstream open_data(std::string_view name) {
  std::ifstream in(data_path(name), std::ios::binary);
  if (!in) throw DataError("missing test data " + std::string(name));
  return in;
}

inline DictionaryLoad toy_dictionary_load() {
  auto in = open_data("dict.tsv");
  return load_dictionary(in, default_attribute_table());
}

inline PronunciationDictionary toy_dictionary() { return toy_dictionary_load().dictionary; }

inline std::vector<std::string> data_lines(std::string_view name) {
  auto in = open_data(name);
  return read_lines(in);
}

}  // namespace ipakit::test
