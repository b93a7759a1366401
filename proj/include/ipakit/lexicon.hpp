#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "ipakit/ipa_inventory.hpp"

namespace ipakit {

struct RejectedLine {
  std::size_t line = 0;
  std::string text;
  std::string reason;
};

/// Lowercase word -> IPA transcription (first listed variant).
class PronunciationDictionary {
 public:
  /// Returns false (and keeps the existing entry) when the word is present.
  bool insert(std::string word, std::string ipa);
  const std::string* find(std::string_view word) const;
  bool contains(std::string_view word) const { return find(word) != nullptr; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::unordered_map<std::string, std::string>& entries() const noexcept { return entries_; }

 private:
  std::unordered_map<std::string, std::string> entries_;
};

struct DictionaryLoad {
  PronunciationDictionary dictionary;
  std::vector<RejectedLine> rejected;
};

/// Reads "word<TAB>ipa[, ipa2...]" lines. Words are lowercased and the first
/// variant is kept; a line whose kept transcription does not parse is
/// rejected with a report instead of aborting the load.
DictionaryLoad load_dictionary(std::istream& in, const AttributeTable& table);

std::string to_lower_ascii(std::string_view s);

struct ConversionFailure {
  std::string word;    // first word missing from the dictionary, if any
  std::string reason;
};

using ConversionResult = std::variant<PronunciationSequence, ConversionFailure>;

/// Replaces every word (maximal run of Latin letters and apostrophes) by its
/// transcription and passes every other character through as a token.
ConversionResult convert_sentence(std::string_view text, const PronunciationDictionary& dict,
                                  const AttributeTable& table);

struct CorpusPair {
  std::string text;
  PronunciationSequence pronunciation;

  friend bool operator==(const CorpusPair&, const CorpusPair&) = default;
};

struct CorpusReport {
  std::size_t sentences_kept = 0;
  std::size_t sentences_dropped = 0;
  std::size_t words_kept = 0;
  std::size_t words_dropped = 0;
  std::vector<std::pair<std::string, ConversionFailure>> failures;  // (input, failure)
};

struct Corpus {
  std::vector<CorpusPair> pairs;
  CorpusReport report;
};

/// Converts each sentence (dropping failures), then appends one single-word
/// pair per wordlist entry. Output order equals input order for any `jobs`.
Corpus build_corpus(const std::vector<std::string>& sentences, const PronunciationDictionary& dict,
                    const AttributeTable& table, const std::vector<std::string>* wordlist = nullptr,
                    unsigned jobs = 1);

/// Seeded shuffle, then the first `val_size` pairs form the validation split.
std::pair<std::vector<CorpusPair>, std::vector<CorpusPair>> split_validation(
    std::vector<CorpusPair> pairs, std::size_t val_size, std::uint64_t seed);

/// word -> Zipf scale value.
class FrequencyTable {
 public:
  void set(std::string word, double zipf);
  /// 0 for absent words.
  double zipf(std::string_view word) const;
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::unordered_map<std::string, double> entries_;
};

/// Reads "word<TAB>zipf" lines; values must be finite and non-negative.
FrequencyTable load_frequency_table(std::istream& in);

/// Words of a label: maximal runs of Latin letters and apostrophes, lowercased.
std::vector<std::string> label_words(std::string_view label);

/// Keeps labels whose least frequent word has Zipf >= threshold.
std::vector<std::string> zipf_filter(const std::vector<std::string>& labels, const FrequencyTable& freq,
                                     double threshold);

/// Non-empty lines with any trailing CR stripped.
std::vector<std::string> read_lines(std::istream& in);

// Corpus TSV: "text<TAB>ipa" per line.
std::vector<CorpusPair> read_corpus_tsv(std::istream& in, const AttributeTable& table);
void write_corpus_tsv(std::ostream& out, const std::vector<CorpusPair>& pairs);

}  // namespace ipakit
