#include "ipakit/ipa_inventory.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <sstream>

#include "ipakit/error.hpp"

namespace ipakit {

namespace {

constexpr std::array<std::string_view, kMannerCount> kMannerNames = {
    "nasal",       "plosive", "fricative",          "approximant",
    "trill",       "tap_flap", "lateral_fricative", "lateral_approximant"};

constexpr std::array<std::string_view, kPlaceCount> kPlaceNames = {
    "bilabial", "labiodental", "dental", "alveolar",   "postalveolar", "retroflex",
    "palatal",  "velar",       "uvular", "pharyngeal", "glottal"};

constexpr std::string_view kDefaultTableTsv =
    "# symbol\tclass\tvoicing\tmanners\tplaces\theight\tbackness\trounded\n"
    "p\tconsonant\tvoiceless\tplosive\tbilabial\t-\t-\t-\n"
    "b\tconsonant\tvoiced\tplosive\tbilabial\t-\t-\t-\n"
    "t\tconsonant\tvoiceless\tplosive\talveolar\t-\t-\t-\n"
    "d\tconsonant\tvoiced\tplosive\talveolar\t-\t-\t-\n"
    "k\tconsonant\tvoiceless\tplosive\tvelar\t-\t-\t-\n"
    "g\tconsonant\tvoiced\tplosive\tvelar\t-\t-\t-\n"
    "m\tconsonant\tvoiced\tnasal\tbilabial\t-\t-\t-\n"
    "n\tconsonant\tvoiced\tnasal\talveolar\t-\t-\t-\n"
    "ŋ\tconsonant\tvoiced\tnasal\tvelar\t-\t-\t-\n"
    "f\tconsonant\tvoiceless\tfricative\tlabiodental\t-\t-\t-\n"
    "v\tconsonant\tvoiced\tfricative\tlabiodental\t-\t-\t-\n"
    "θ\tconsonant\tvoiceless\tfricative\tdental\t-\t-\t-\n"
    "ð\tconsonant\tvoiced\tfricative\tdental\t-\t-\t-\n"
    "s\tconsonant\tvoiceless\tfricative\talveolar\t-\t-\t-\n"
    "z\tconsonant\tvoiced\tfricative\talveolar\t-\t-\t-\n"
    "ʃ\tconsonant\tvoiceless\tfricative\tpostalveolar\t-\t-\t-\n"
    "ʒ\tconsonant\tvoiced\tfricative\tpostalveolar\t-\t-\t-\n"
    "h\tconsonant\tvoiceless\tfricative\tglottal\t-\t-\t-\n"
    "# affricates carry the plosive manner at the postalveolar place\n"
    "ʧ\tconsonant\tvoiceless\tplosive\tpostalveolar\t-\t-\t-\n"
    "ʤ\tconsonant\tvoiced\tplosive\tpostalveolar\t-\t-\t-\n"
    "l\tconsonant\tvoiced\tlateral_approximant\talveolar\t-\t-\t-\n"
    "ɹ\tconsonant\tvoiced\tapproximant\talveolar\t-\t-\t-\n"
    "j\tconsonant\tvoiced\tapproximant\tpalatal\t-\t-\t-\n"
    "w\tconsonant\tvoiced\tapproximant\tbilabial,velar\t-\t-\t-\n"
    "i\tvowel\t-\t-\t-\t0\t0\tno\n"
    "ɪ\tvowel\t-\t-\t-\t1\t1\tno\n"
    "e\tvowel\t-\t-\t-\t2\t0\tno\n"
    "ɛ\tvowel\t-\t-\t-\t4\t0\tno\n"
    "æ\tvowel\t-\t-\t-\t5\t0\tno\n"
    "ə\tvowel\t-\t-\t-\t3\t2\tno\n"
    "ʌ\tvowel\t-\t-\t-\t4\t4\tno\n"
    "ɜ\tvowel\t-\t-\t-\t4\t2\tno\n"
    "ɑ\tvowel\t-\t-\t-\t6\t4\tno\n"
    "ɔ\tvowel\t-\t-\t-\t4\t4\tyes\n"
    "o\tvowel\t-\t-\t-\t2\t4\tyes\n"
    "ʊ\tvowel\t-\t-\t-\t1\t3\tyes\n"
    "u\tvowel\t-\t-\t-\t0\t4\tyes\n"
    "a\tvowel\t-\t-\t-\t6\t0\tno\n"
    "ˈ\tother\t-\t-\t-\t-\t-\t-\n"
    "ˌ\tother\t-\t-\t-\t-\t-\t-\n"
    "<space>\tother\t-\t-\t-\t-\t-\t-\n"
    ".\tother\t-\t-\t-\t-\t-\t-\n"
    ",\tother\t-\t-\t-\t-\t-\t-\n"
    "!\tother\t-\t-\t-\t-\t-\t-\n"
    "?\tother\t-\t-\t-\t-\t-\t-\n"
    "'\tother\t-\t-\t-\t-\t-\t-\n"
    "-\tother\t-\t-\t-\t-\t-\t-\n"
    "0\tother\t-\t-\t-\t-\t-\t-\n"
    "1\tother\t-\t-\t-\t-\t-\t-\n"
    "2\tother\t-\t-\t-\t-\t-\t-\n"
    "3\tother\t-\t-\t-\t-\t-\t-\n"
    "4\tother\t-\t-\t-\t-\t-\t-\n"
    "5\tother\t-\t-\t-\t-\t-\t-\n"
    "6\tother\t-\t-\t-\t-\t-\t-\n"
    "7\tother\t-\t-\t-\t-\t-\t-\n"
    "8\tother\t-\t-\t-\t-\t-\t-\n"
    "9\tother\t-\t-\t-\t-\t-\t-\n";

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool absent(std::string_view field) { return field.empty() || field == "-"; }

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw DataError("attribute table line " + std::to_string(line) + ": " + what);
}

int parse_level(std::string_view field, int max, std::size_t line, const char* name) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    fail(line, std::string("malformed ") + name + " '" + std::string(field) + "'");
  if (value < 0 || value > max)
    fail(line, std::string(name) + " " + std::to_string(value) + " outside 0.." +
                   std::to_string(max));
  return value;
}

template <std::size_t N>
std::size_t lookup_name(const std::array<std::string_view, N>& names, std::string_view name,
                        std::size_t line, const char* kind) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) fail(line, std::string("unknown ") + kind + " '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - names.begin());
}

}  // namespace

std::string_view to_string(Manner m) { return kMannerNames[static_cast<std::size_t>(m)]; }
std::string_view to_string(Place p) { return kPlaceNames[static_cast<std::size_t>(p)]; }

// ---------------------------------------------------------------------------
// UTF-8

std::u32string decode_utf8(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    auto c = static_cast<unsigned char>(text[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + len > text.size())
      throw DataError("invalid UTF-8 at byte " + std::to_string(i));
    char32_t cp = len == 1 ? c : len == 2 ? (c & 0x1F) : len == 3 ? (c & 0x0F) : (c & 0x07);
    for (std::size_t k = 1; k < len; ++k) {
      auto cc = static_cast<unsigned char>(text[i + k]);
      if ((cc >> 6) != 0x2) throw DataError("invalid UTF-8 at byte " + std::to_string(i + k));
      cp = (cp << 6) | (cc & 0x3F);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string encode_utf8(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return out;
}

std::string encode_utf8(std::u32string_view text) {
  std::string out;
  for (char32_t cp : text) out += encode_utf8(cp);
  return out;
}

// ---------------------------------------------------------------------------
// AttributeTable

AttributeTable::AttributeTable(std::vector<Phoneme> phonemes, std::vector<std::string> other_tokens)
    : phonemes_(std::move(phonemes)), other_tokens_(std::move(other_tokens)) {
  auto add = [this](const std::string& symbol) {
    if (symbol.empty()) throw DataError("attribute table: empty symbol");
    if (!ids_.emplace(symbol, ids_.size()).second)
      throw DataError("attribute table: duplicate symbol '" + symbol + "'");
    max_symbol_length_ = std::max(max_symbol_length_, decode_utf8(symbol).size());
  };
  for (const auto& p : phonemes_) {
    if (p.is_consonant()) {
      if (p.places.none()) throw DataError("consonant '" + p.symbol + "' has no place");
      if (p.manners.none()) throw DataError("consonant '" + p.symbol + "' has no manner");
    } else {
      if (p.height_level < 0 || p.height_level > kMaxHeightLevel)
        throw DataError("vowel '" + p.symbol + "' height out of range");
      if (p.backness_level < 0 || p.backness_level > kMaxBacknessLevel)
        throw DataError("vowel '" + p.symbol + "' backness out of range");
    }
    add(p.symbol);
  }
  for (const auto& t : other_tokens_) add(t);
}

std::size_t AttributeTable::consonant_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(phonemes_.begin(), phonemes_.end(), [](const Phoneme& p) { return p.is_consonant(); }));
}

std::size_t AttributeTable::vowel_count() const noexcept {
  return phonemes_.size() - consonant_count();
}

bool AttributeTable::contains(std::string_view symbol) const {
  return ids_.find(std::string(symbol)) != ids_.end();
}

std::optional<std::size_t> AttributeTable::token_id(std::string_view symbol) const {
  auto it = ids_.find(std::string(symbol));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::size_t AttributeTable::require_token_id(std::string_view symbol) const {
  auto id = token_id(symbol);
  if (!id) throw DataError("unknown token '" + std::string(symbol) + "'");
  return *id;
}

const std::string& AttributeTable::symbol(std::size_t token_id) const {
  if (token_id < phonemes_.size()) return phonemes_[token_id].symbol;
  return other_tokens_.at(token_id - phonemes_.size());
}

const Phoneme* AttributeTable::phoneme(std::string_view symbol) const {
  auto id = token_id(symbol);
  if (!id || *id >= phonemes_.size()) return nullptr;
  return &phonemes_[*id];
}

AttributeTable load_attribute_table(std::istream& in) {
  std::vector<Phoneme> phonemes;
  std::vector<std::string> others;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty() || raw.front() == '#') continue;
    auto fields = split(raw, '\t');
    if (fields.size() != 8) fail(line_no, "expected 8 tab-separated columns, got " + std::to_string(fields.size()));
    std::string symbol = fields[0] == "<space>" ? std::string(kSpaceToken) : fields[0];
    const auto& cls = fields[1];

    if (cls == "other") {
      for (std::size_t c = 2; c < 8; ++c)
        if (!absent(fields[c])) fail(line_no, "non-phoneme token '" + symbol + "' carries attributes");
      others.push_back(symbol);
      continue;
    }

    Phoneme p;
    p.symbol = symbol;
    if (cls == "consonant") {
      p.cls = PhonemeClass::Consonant;
      if (!absent(fields[5]) || !absent(fields[6]) || !absent(fields[7]))
        fail(line_no, "consonant '" + symbol + "' has vowel fields");
      if (fields[2] == "voiced") p.voiced = true;
      else if (fields[2] == "voiceless") p.voiced = false;
      else fail(line_no, "consonant '" + symbol + "' needs voiced|voiceless");
      if (absent(fields[3]) || absent(fields[4])) fail(line_no, "consonant '" + symbol + "' needs manners and places");
      for (const auto& m : split(fields[3], ',')) p.manners.set(lookup_name(kMannerNames, m, line_no, "manner"));
      for (const auto& pl : split(fields[4], ',')) p.places.set(lookup_name(kPlaceNames, pl, line_no, "place"));
    } else if (cls == "vowel") {
      p.cls = PhonemeClass::Vowel;
      if (!absent(fields[2]) || !absent(fields[3]) || !absent(fields[4]))
        fail(line_no, "vowel '" + symbol + "' has consonant fields");
      if (absent(fields[5]) || absent(fields[6]) || absent(fields[7]))
        fail(line_no, "vowel '" + symbol + "' needs height, backness and rounded");
      p.height_level = parse_level(fields[5], kMaxHeightLevel, line_no, "height_level");
      p.backness_level = parse_level(fields[6], kMaxBacknessLevel, line_no, "backness_level");
      if (fields[7] == "yes") p.rounded = true;
      else if (fields[7] == "no") p.rounded = false;
      else fail(line_no, "rounded must be yes|no");
    } else {
      fail(line_no, "unknown class '" + cls + "'");
    }
    phonemes.push_back(std::move(p));
  }
  return AttributeTable(std::move(phonemes), std::move(others));
}

std::string_view default_attribute_table_tsv() { return kDefaultTableTsv; }

const AttributeTable& default_attribute_table() {
  static const AttributeTable table = [] {
    std::istringstream in{std::string(kDefaultTableTsv)};
    return load_attribute_table(in);
  }();
  return table;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct Rewrite {
  std::u32string from;
  std::u32string to;
};

// Applied in order at each position; a rewrite is skipped when its source is
// itself a table symbol or its target symbols are not in the table.
const std::vector<Rewrite>& rewrites() {
  static const std::vector<Rewrite> r = {
      {U"t\u0361\u0283", U"\u02A7"},  // t͡ʃ -> ʧ
      {U"d\u0361\u0292", U"\u02A4"},  // d͡ʒ -> ʤ
      {U"t\u035C\u0283", U"\u02A7"},
      {U"d\u035C\u0292", U"\u02A4"},
      {U"t\u0283", U"\u02A7"},  // tʃ -> ʧ
      {U"d\u0292", U"\u02A4"},  // dʒ -> ʤ
      {U"\u025A", U"\u0259\u0279"},  // ɚ -> əɹ
      {U"\u025D", U"\u025C\u0279"},  // ɝ -> ɜɹ
      {U"\u0261", U"g"},  // script g
      {U"r", U"\u0279"},  // r -> ɹ
  };
  return r;
}

bool rewrite_applies(const Rewrite& rw, const AttributeTable& table) {
  if (table.contains(encode_utf8(rw.from))) return false;
  for (char32_t cp : rw.to)
    if (!table.contains(encode_utf8(cp))) return false;
  return true;
}

}  // namespace

PronunciationSequence parse_ipa(std::string_view text, const AttributeTable& table) {
  const std::u32string input = decode_utf8(text);

  // Normalize, keeping the original code point offset of every output unit.
  std::u32string norm;
  std::vector<std::size_t> origin;
  norm.reserve(input.size());
  origin.reserve(input.size());
  std::vector<const Rewrite*> active;
  for (const auto& rw : rewrites())
    if (rewrite_applies(rw, table)) active.push_back(&rw);

  std::size_t i = 0;
  while (i < input.size()) {
    bool matched = false;
    for (const Rewrite* rw : active) {
      if (input.compare(i, rw->from.size(), rw->from) == 0) {
        for (char32_t cp : rw->to) {
          norm.push_back(cp);
          origin.push_back(i);
        }
        i += rw->from.size();
        matched = true;
        break;
      }
    }
    if (matched) continue;
    char32_t cp = input[i];
    if (cp >= U'A' && cp <= U'Z') cp = cp - U'A' + U'a';
    norm.push_back(cp);
    origin.push_back(i);
    ++i;
  }

  PronunciationSequence seq;
  const std::size_t max_len = std::max<std::size_t>(1, table.max_symbol_length());
  std::size_t pos = 0;
  while (pos < norm.size()) {
    std::size_t len = std::min(max_len, norm.size() - pos);
    for (; len > 0; --len) {
      auto candidate = encode_utf8(std::u32string_view(norm).substr(pos, len));
      if (table.contains(candidate)) {
        seq.tokens.push_back(std::move(candidate));
        break;
      }
    }
    if (len == 0) throw UnknownSymbol(origin[pos], encode_utf8(input[origin[pos]]));
    pos += len;
  }
  return seq;
}

std::string render(const PronunciationSequence& seq) {
  std::string out;
  for (const auto& t : seq.tokens) out += t;
  return out;
}

}  // namespace ipakit
