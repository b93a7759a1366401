#include "ipakit/nonword.hpp"

#include <istream>
#include <ostream>

#include "ipakit/error.hpp"

namespace ipakit {

SubstitutionTable::SubstitutionTable(std::vector<Substitution> entries) : entries_(std::move(entries)) {
  for (const auto& e : entries_)
    if (e.spellings.empty()) throw DataError("substitution for '" + e.consonant + "' has no spelling");
}

const SubstitutionTable& SubstitutionTable::english() {
  static const SubstitutionTable table({
      {"s", {"s"}},  {"n", {"n"}},  {"f", {"f"}},      {"l", {"l"}},  {"z", {"z"}},   {"b", {"b"}},
      {"ɹ", {"r"}},  {"p", {"p"}},  {"g", {"g"}},      {"k", {"k", "c"}},             {"d", {"d"}},
      {"m", {"m"}},  {"θ", {"th"}}, {"t", {"t"}},      {"ʤ", {"j"}},  {"j", {"y"}},   {"h", {"h"}},
      {"v", {"v"}},  {"ʃ", {"sh"}}, {"ʧ", {"ch"}},     {"w", {"w"}},
  });
  return table;
}

std::string SubstitutionTable::leading_grapheme(std::string_view label) const {
  const std::string lower = to_lower_ascii(label);
  std::string best;
  for (const auto& e : entries_)
    for (const auto& s : e.spellings)
      if (s.size() > best.size() && lower.compare(0, s.size(), s) == 0) best = s;
  return best;
}

bool starts_with_sole_consonant(const PronunciationSequence& seq, const AttributeTable& table) {
  if (seq.empty()) throw DataError("starts_with_sole_consonant: empty sequence");
  const Phoneme* first = table.phoneme(seq[0]);
  if (!first || !first->is_consonant() || seq.size() < 2) return false;
  const Phoneme* second = table.phoneme(seq[1]);
  return !(second && second->is_consonant());
}

int shared_attributes(std::string_view a, std::string_view b, const AttributeTable& table) {
  const Phoneme* pa = table.phoneme(a);
  const Phoneme* pb = table.phoneme(b);
  if (!pa || !pa->is_consonant()) throw DataError("'" + std::string(a) + "' is not a consonant");
  if (!pb || !pb->is_consonant()) throw DataError("'" + std::string(b) + "' is not a consonant");
  return int{pa->voiced == pb->voiced} + int{(pa->places & pb->places).any()} +
         int{(pa->manners & pb->manners).any()};
}

std::unordered_set<std::string> known_pronunciations(const PronunciationDictionary& dict,
                                                     const AttributeTable& table) {
  std::unordered_set<std::string> out;
  for (const auto& [word, ipa] : dict.entries()) out.insert(render(parse_ipa(ipa, table)));
  return out;
}

namespace {

PronunciationSequence label_pronunciation(std::string_view label, const PronunciationDictionary& dict,
                                          const AttributeTable& table) {
  auto result = convert_sentence(label, dict, table);
  if (auto* failure = std::get_if<ConversionFailure>(&result))
    throw DataError("cannot convert label '" + std::string(label) + "': " + failure->reason +
                    (failure->word.empty() ? "" : " (" + failure->word + ")"));
  return std::get<PronunciationSequence>(std::move(result));
}

}  // namespace

std::vector<Nonword> generate_nonwords(std::string_view label, const PronunciationDictionary& dict,
                                       const AttributeTable& table, const SubstitutionTable& subs,
                                       const std::unordered_set<std::string>& vocab,
                                       const std::unordered_set<std::string>& known_prons) {
  const PronunciationSequence source = label_pronunciation(label, dict, table);
  if (!starts_with_sole_consonant(source, table))
    throw DataError("label '" + std::string(label) + "' does not start with a sole consonant");

  const std::string& original = source[0];
  const std::string rest = to_lower_ascii(label).substr(subs.leading_grapheme(label).size());

  std::vector<Nonword> out;
  for (const auto& entry : subs.entries()) {
    if (entry.consonant == original) continue;
    PronunciationSequence pron = source;
    pron.tokens[0] = entry.consonant;
    if (known_prons.count(render(pron))) continue;
    for (const auto& spelling : entry.spellings) {
      std::string candidate = spelling + rest;
      if (vocab.count(candidate)) continue;
      out.push_back({pron, std::move(candidate), std::string(label), original, entry.consonant,
                     shared_attributes(original, entry.consonant, table)});
      break;
    }
  }
  return out;
}

void write_nonwords_tsv(std::ostream& out, const std::vector<Nonword>& nonwords) {
  for (const auto& n : nonwords)
    out << n.spelling << '\t' << render(n.pronunciation) << '\t' << n.source_label << '\t'
        << n.shared_attribute_count << '\n';
}

std::vector<Nonword> read_nonwords_tsv(std::istream& in, const PronunciationDictionary& dict,
                                       const AttributeTable& table) {
  std::vector<Nonword> out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t pos; (pos = raw.find('\t', start)) != std::string::npos; start = pos + 1)
      f.push_back(raw.substr(start, pos - start));
    f.push_back(raw.substr(start));
    auto where = "nonword line " + std::to_string(line_no) + ": ";
    if (f.size() != 4) throw DataError(where + "expected 4 columns");
    try {
      Nonword n;
      n.spelling = f[0];
      n.pronunciation = parse_ipa(f[1], table);
      n.source_label = f[2];
      n.shared_attribute_count = std::stoi(f[3]);
      n.source_consonant = label_pronunciation(n.source_label, dict, table).tokens.at(0);
      n.new_consonant = n.pronunciation.tokens.at(0);
      if (shared_attributes(n.source_consonant, n.new_consonant, table) != n.shared_attribute_count)
        throw DataError("shared_count does not match the consonants");
      out.push_back(std::move(n));
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    } catch (const std::exception& e) {
      throw DataError(where + "malformed field (" + e.what() + ")");
    }
  }
  return out;
}

}  // namespace ipakit
