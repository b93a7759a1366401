#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "ipakit/ipa_inventory.hpp"
#include "ipakit/lexicon.hpp"

namespace ipakit {

struct Substitution {
  std::string consonant;
  std::vector<std::string> spellings;  // preferred spelling first
};

/// Candidate initial consonants and their spellings. /ð/ is absent because it
/// spells the same as /θ/.
class SubstitutionTable {
 public:
  explicit SubstitutionTable(std::vector<Substitution> entries);
  static const SubstitutionTable& english();

  const std::vector<Substitution>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  /// Longest spelling in the table that prefixes `label` (case-insensitive);
  /// empty when none does.
  std::string leading_grapheme(std::string_view label) const;

 private:
  std::vector<Substitution> entries_;
};

struct Nonword {
  PronunciationSequence pronunciation;
  std::string spelling;
  std::string source_label;
  std::string source_consonant;
  std::string new_consonant;
  int shared_attribute_count = 0;
};

/// Token 0 is a consonant and token 1 exists and is not a consonant.
/// Throws DataError for an empty sequence.
bool starts_with_sole_consonant(const PronunciationSequence& seq, const AttributeTable& table);

/// Number of shared members of {voicing, place, manner} between two
/// consonants (0..3). Throws DataError if either is not a consonant.
int shared_attributes(std::string_view a, std::string_view b, const AttributeTable& table);

/// Rendered transcriptions of every dictionary entry, for the existence filter.
std::unordered_set<std::string> known_pronunciations(const PronunciationDictionary& dict,
                                                     const AttributeTable& table);

/// Substitutes the initial consonant of `label`'s pronunciation with every
/// other table consonant. Candidates whose spelling is in `vocab` or whose
/// transcription is in `known_prons` are discarded. Throws DataError when the
/// label cannot be converted or does not start with a sole consonant.
std::vector<Nonword> generate_nonwords(std::string_view label, const PronunciationDictionary& dict,
                                       const AttributeTable& table, const SubstitutionTable& subs,
                                       const std::unordered_set<std::string>& vocab,
                                       const std::unordered_set<std::string>& known_prons);

/// TSV "spelling<TAB>ipa<TAB>source_label<TAB>shared_count".
void write_nonwords_tsv(std::ostream& out, const std::vector<Nonword>& nonwords);
/// Reads the TSV back; source/new consonants are recovered from token 0 of
/// the source label and nonword pronunciations.
std::vector<Nonword> read_nonwords_tsv(std::istream& in, const PronunciationDictionary& dict,
                                       const AttributeTable& table);

}  // namespace ipakit
