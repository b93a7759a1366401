#include "ipakit/phoneme_embedding.hpp"

#include <map>

namespace ipakit {

namespace {

std::string other_label(const std::string& symbol) {
  static const std::map<std::string, std::string, std::less<>> names = {
      {std::string(kPrimaryStress), "PrimaryStress"},
      {std::string(kSecondaryStress), "SecondaryStress"},
      {" ", "Char:Space"},
      {".", "Char:Period"},
      {",", "Char:Comma"},
      {"!", "Char:Exclamation"},
      {"?", "Char:Question"},
      {"'", "Char:Apostrophe"},
      {"-", "Char:Hyphen"},
  };
  if (auto it = names.find(symbol); it != names.end()) return it->second;
  if (symbol.size() == 1 && symbol[0] >= '0' && symbol[0] <= '9') return "Char:Digit" + symbol;
  return "Char:" + symbol;
}

std::string capitalize(std::string_view s) {
  // tap_flap -> TapFlap
  std::string out;
  bool upper = true;
  for (char c : s) {
    if (c == '_') {
      upper = true;
      continue;
    }
    out.push_back(upper ? static_cast<char>(c - 'a' + 'A') : c);
    upper = false;
  }
  return out;
}

}  // namespace

AttributeIndex::AttributeIndex(const AttributeTable& table) {
  labels_.push_back("ConsonantFlag");
  labels_.push_back("Voicing");
  for (std::size_t m = 0; m < kMannerCount; ++m)
    labels_.push_back("Manner:" + capitalize(to_string(static_cast<Manner>(m))));
  for (std::size_t p = 0; p < kPlaceCount; ++p)
    labels_.push_back("Place:" + capitalize(to_string(static_cast<Place>(p))));
  labels_.push_back("VowelFlag");
  labels_.push_back("Height");
  labels_.push_back("Backness");
  labels_.push_back("Roundedness");
  for (const auto& t : table.other_tokens()) labels_.push_back(other_label(t));
}

Eigen::VectorXd attribute_vector(std::string_view token, const AttributeTable& table) {
  const std::size_t id = table.require_token_id(token);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(AttributeIndex::kFirstOther +
                                            static_cast<Eigen::Index>(table.other_tokens().size()));
  if (id >= table.phonemes().size()) {
    x(AttributeIndex::other(id - table.phonemes().size())) = 1.0;
    return x;
  }
  const Phoneme& p = table.phonemes()[id];
  if (p.is_consonant()) {
    x(AttributeIndex::kConsonantFlag) = 1.0;
    x(AttributeIndex::kVoicing) = p.voiced ? 1.0 : 0.0;
    for (std::size_t m = 0; m < kMannerCount; ++m)
      if (p.manners.test(m)) x(AttributeIndex::manner(static_cast<Manner>(m))) = 1.0;
    for (std::size_t pl = 0; pl < kPlaceCount; ++pl)
      if (p.places.test(pl)) x(AttributeIndex::place(static_cast<Place>(pl))) = 1.0;
  } else {
    x(AttributeIndex::kVowelFlag) = 1.0;
    x(AttributeIndex::kHeight) = static_cast<double>(p.height_level) / kMaxHeightLevel;
    x(AttributeIndex::kBackness) = static_cast<double>(p.backness_level) / kMaxBacknessLevel;
    x(AttributeIndex::kRoundedness) = p.rounded ? 1.0 : 0.0;
  }
  return x;
}

Eigen::MatrixXd attribute_matrix(const AttributeTable& table) {
  const AttributeIndex index(table);
  Eigen::MatrixXd a(static_cast<Eigen::Index>(table.size()), index.size());
  for (std::size_t id = 0; id < table.size(); ++id)
    a.row(static_cast<Eigen::Index>(id)) = attribute_vector(table.symbol(id), table).transpose();
  return a;
}

}  // namespace ipakit
