#pragma once

#include <bitset>
#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ipakit {

enum class PhonemeClass { Consonant, Vowel };

enum class Manner {
  Nasal,
  Plosive,
  Fricative,
  Approximant,
  Trill,
  TapFlap,
  LateralFricative,
  LateralApproximant,
};
inline constexpr std::size_t kMannerCount = 8;

enum class Place {
  Bilabial,
  Labiodental,
  Dental,
  Alveolar,
  Postalveolar,
  Retroflex,
  Palatal,
  Velar,
  Uvular,
  Pharyngeal,
  Glottal,
};
inline constexpr std::size_t kPlaceCount = 11;

inline constexpr int kMaxHeightLevel = 6;    // 0 = close, 6 = open
inline constexpr int kMaxBacknessLevel = 4;  // 0 = front, 4 = back

using MannerSet = std::bitset<kMannerCount>;
using PlaceSet = std::bitset<kPlaceCount>;

std::string_view to_string(Manner m);
std::string_view to_string(Place p);

/// One IPA phoneme with its chart attributes. Consonant fields are only
/// meaningful for consonants and vowel fields only for vowels.
struct Phoneme {
  std::string symbol;
  PhonemeClass cls = PhonemeClass::Consonant;

  bool voiced = false;
  MannerSet manners;
  PlaceSet places;

  int height_level = 0;
  int backness_level = 0;
  bool rounded = false;

  bool is_consonant() const noexcept { return cls == PhonemeClass::Consonant; }
  bool is_vowel() const noexcept { return cls == PhonemeClass::Vowel; }
  bool has_manner(Manner m) const { return manners.test(static_cast<std::size_t>(m)); }
  bool has_place(Place p) const { return places.test(static_cast<std::size_t>(p)); }

  friend bool operator==(const Phoneme&, const Phoneme&) = default;
};

/// Token symbol used for a word boundary.
inline constexpr std::string_view kSpaceToken = " ";
inline constexpr std::string_view kPrimaryStress = "ˈ";
inline constexpr std::string_view kSecondaryStress = "ˌ";

/// Immutable phoneme inventory plus the non-phoneme tokens (stress marks,
/// space, punctuation, digits). Every symbol has a dense token id: phonemes
/// first in table order, then other tokens in table order.
class AttributeTable {
 public:
  AttributeTable(std::vector<Phoneme> phonemes, std::vector<std::string> other_tokens);

  const std::vector<Phoneme>& phonemes() const noexcept { return phonemes_; }
  const std::vector<std::string>& other_tokens() const noexcept { return other_tokens_; }

  /// Total number of token symbols (phonemes + other tokens).
  std::size_t size() const noexcept { return phonemes_.size() + other_tokens_.size(); }
  std::size_t consonant_count() const noexcept;
  std::size_t vowel_count() const noexcept;

  bool contains(std::string_view symbol) const;
  std::optional<std::size_t> token_id(std::string_view symbol) const;
  /// Throws DataError for an unknown symbol.
  std::size_t require_token_id(std::string_view symbol) const;
  const std::string& symbol(std::size_t token_id) const;

  /// nullptr when the symbol is not a phoneme.
  const Phoneme* phoneme(std::string_view symbol) const;

  /// Longest symbol length in code points.
  std::size_t max_symbol_length() const noexcept { return max_symbol_length_; }

 private:
  std::vector<Phoneme> phonemes_;
  std::vector<std::string> other_tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
  std::size_t max_symbol_length_ = 0;
};

/// Parses the attribute table TSV: symbol, class, voicing, manners, places,
/// height_level, backness_level, rounded. Empty fields and "-" both mean
/// "not applicable"; '#' starts a comment line. The symbol "<space>" is an
/// alias for a literal space.
AttributeTable load_attribute_table(std::istream& in);

/// The builtin English inventory (24 consonants, 14 vowels, stress marks,
/// space, punctuation and digits).
const AttributeTable& default_attribute_table();

/// TSV text of the builtin table, in the format read by load_attribute_table.
std::string_view default_attribute_table_tsv();

/// An ordered list of token symbols drawn from an AttributeTable.
struct PronunciationSequence {
  std::vector<std::string> tokens;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
  const std::string& operator[](std::size_t i) const { return tokens[i]; }

  friend bool operator==(const PronunciationSequence&, const PronunciationSequence&) = default;
};

/// Greedy longest-match tokenization of an IPA string. Before matching,
/// Latin capitals are lowercased and the spelling variants t͡ʃ/tʃ, d͡ʒ/dʒ,
/// r, ɡ, ɚ and ɝ are rewritten to table symbols. Throws UnknownSymbol.
PronunciationSequence parse_ipa(std::string_view text, const AttributeTable& table);

std::string render(const PronunciationSequence& seq);

// UTF-8 helpers shared by the parsers.
std::u32string decode_utf8(std::string_view text);
std::string encode_utf8(std::u32string_view text);
std::string encode_utf8(char32_t cp);

}  // namespace ipakit
