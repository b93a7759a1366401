#include "ipakit/lexicon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include "ipakit/error.hpp"
#include "ipakit/random.hpp"

namespace ipakit {

namespace {

bool is_latin(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_word_char(char c) { return is_latin(c) || c == '\''; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

void append(PronunciationSequence& out, PronunciationSequence&& part) {
  std::move(part.tokens.begin(), part.tokens.end(), std::back_inserter(out.tokens));
}

// A maximal run of word characters, looked up as a whole first; surrounding
// apostrophes ("dogs'", "'tis") fall back to punctuation tokens.
std::optional<ConversionFailure> convert_word(std::string_view run, const PronunciationDictionary& dict,
                                              const AttributeTable& table, PronunciationSequence& out) {
  if (std::none_of(run.begin(), run.end(), is_latin)) {
    append(out, parse_ipa(run, table));
    return std::nullopt;
  }
  if (const auto* ipa = dict.find(to_lower_ascii(run))) {
    append(out, parse_ipa(*ipa, table));
    return std::nullopt;
  }
  std::size_t lead = 0, tail = 0;
  while (lead < run.size() && run[lead] == '\'') ++lead;
  while (tail < run.size() - lead && run[run.size() - 1 - tail] == '\'') ++tail;
  if (lead + tail > 0) {
    auto core = run.substr(lead, run.size() - lead - tail);
    if (const auto* ipa = dict.find(to_lower_ascii(core))) {
      append(out, parse_ipa(run.substr(0, lead), table));
      append(out, parse_ipa(*ipa, table));
      append(out, parse_ipa(run.substr(run.size() - tail), table));
      return std::nullopt;
    }
  }
  return ConversionFailure{to_lower_ascii(run), "word not in dictionary"};
}

}  // namespace

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

bool PronunciationDictionary::insert(std::string word, std::string ipa) {
  return entries_.emplace(std::move(word), std::move(ipa)).second;
}

const std::string* PronunciationDictionary::find(std::string_view word) const {
  auto it = entries_.find(std::string(word));
  return it == entries_.end() ? nullptr : &it->second;
}

DictionaryLoad load_dictionary(std::istream& in, const AttributeTable& table) {
  DictionaryLoad result;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (trim(raw).empty() || raw.front() == '#') continue;
    auto tab = raw.find('\t');
    if (tab == std::string::npos) {
      result.rejected.push_back({line_no, raw, "missing tab separator"});
      continue;
    }
    std::string word = to_lower_ascii(trim(std::string_view(raw).substr(0, tab)));
    std::string_view variants = std::string_view(raw).substr(tab + 1);
    std::string first(trim(variants.substr(0, variants.find(','))));
    if (word.empty() || first.empty()) {
      result.rejected.push_back({line_no, raw, "empty word or transcription"});
      continue;
    }
    try {
      parse_ipa(first, table);
    } catch (const UnknownSymbol& e) {
      result.rejected.push_back({line_no, raw, e.what()});
      continue;
    }
    result.dictionary.insert(std::move(word), std::move(first));
  }
  return result;
}

ConversionResult convert_sentence(std::string_view text, const PronunciationDictionary& dict,
                                  const AttributeTable& table) {
  PronunciationSequence out;
  std::size_t i = 0;
  try {
    while (i < text.size()) {
      std::size_t j = i;
      if (is_word_char(text[i])) {
        while (j < text.size() && is_word_char(text[j])) ++j;
        if (auto failure = convert_word(text.substr(i, j - i), dict, table, out)) return *failure;
      } else {
        while (j < text.size() && !is_word_char(text[j])) ++j;
        append(out, parse_ipa(text.substr(i, j - i), table));
      }
      i = j;
    }
  } catch (const DataError& e) {
    return ConversionFailure{"", e.what()};
  }
  return out;
}

Corpus build_corpus(const std::vector<std::string>& sentences, const PronunciationDictionary& dict,
                    const AttributeTable& table, const std::vector<std::string>* wordlist,
                    unsigned jobs) {
  std::vector<std::string_view> inputs(sentences.begin(), sentences.end());
  const std::size_t n_sentences = inputs.size();
  if (wordlist) inputs.insert(inputs.end(), wordlist->begin(), wordlist->end());

  std::vector<std::optional<ConversionResult>> results(inputs.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) results[k] = convert_sentence(inputs[k], dict, table);
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, inputs.size()))));
  if (jobs == 1) {
    work(0, inputs.size());
  } else {
    std::vector<std::jthread> workers;
    const std::size_t chunk = (inputs.size() + jobs - 1) / jobs;
    for (unsigned w = 0; w < jobs; ++w) {
      std::size_t begin = std::min(inputs.size(), w * chunk);
      std::size_t end = std::min(inputs.size(), begin + chunk);
      workers.emplace_back(work, begin, end);
    }
  }

  Corpus corpus;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const bool single_word = k >= n_sentences;
    auto& r = *results[k];
    if (auto* seq = std::get_if<PronunciationSequence>(&r)) {
      corpus.pairs.push_back({std::string(inputs[k]), std::move(*seq)});
      ++(single_word ? corpus.report.words_kept : corpus.report.sentences_kept);
    } else {
      corpus.report.failures.emplace_back(std::string(inputs[k]), std::get<ConversionFailure>(r));
      ++(single_word ? corpus.report.words_dropped : corpus.report.sentences_dropped);
    }
  }
  return corpus;
}

std::pair<std::vector<CorpusPair>, std::vector<CorpusPair>> split_validation(
    std::vector<CorpusPair> pairs, std::size_t val_size, std::uint64_t seed) {
  if (val_size > pairs.size())
    throw DataError("validation size " + std::to_string(val_size) + " exceeds corpus size " +
                    std::to_string(pairs.size()));
  Rng rng(seed);
  std::shuffle(pairs.begin(), pairs.end(), rng);
  std::vector<CorpusPair> val(std::make_move_iterator(pairs.begin()),
                              std::make_move_iterator(pairs.begin() + static_cast<std::ptrdiff_t>(val_size)));
  pairs.erase(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(val_size));
  return {std::move(pairs), std::move(val)};
}

void FrequencyTable::set(std::string word, double zipf) {
  if (!std::isfinite(zipf) || zipf < 0.0) throw DataError("invalid Zipf value for '" + word + "'");
  entries_[to_lower_ascii(word)] = zipf;
}

double FrequencyTable::zipf(std::string_view word) const {
  auto it = entries_.find(to_lower_ascii(word));
  return it == entries_.end() ? 0.0 : it->second;
}

FrequencyTable load_frequency_table(std::istream& in) {
  FrequencyTable table;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (trim(raw).empty() || raw.front() == '#') continue;
    auto tab = raw.find('\t');
    if (tab == std::string::npos)
      throw DataError("frequency table line " + std::to_string(line_no) + ": missing tab");
    std::size_t consumed = 0;
    double value = 0.0;
    std::string field(trim(std::string_view(raw).substr(tab + 1)));
    try {
      value = std::stod(field, &consumed);
    } catch (const std::exception&) {
      consumed = 0;
    }
    if (consumed == 0 || consumed != field.size())
      throw DataError("frequency table line " + std::to_string(line_no) + ": malformed value '" + field + "'");
    try {
      table.set(raw.substr(0, tab), value);
    } catch (const DataError& e) {
      throw DataError("frequency table line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return table;
}

std::vector<std::string> label_words(std::string_view label) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < label.size()) {
    if (!is_word_char(label[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < label.size() && is_word_char(label[j])) ++j;
    auto run = label.substr(i, j - i);
    if (std::any_of(run.begin(), run.end(), is_latin)) words.push_back(to_lower_ascii(run));
    i = j;
  }
  return words;
}

std::vector<std::string> zipf_filter(const std::vector<std::string>& labels, const FrequencyTable& freq,
                                     double threshold) {
  std::vector<std::string> kept;
  for (const auto& label : labels) {
    double lowest = std::numeric_limits<double>::infinity();
    for (const auto& w : label_words(label)) lowest = std::min(lowest, freq.zipf(w));
    if (!std::isfinite(lowest)) lowest = 0.0;  // label without words
    if (lowest >= threshold) kept.push_back(label);
  }
  return kept;
}

std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string raw;
  while (std::getline(in, raw)) {
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (!raw.empty()) lines.push_back(std::move(raw));
  }
  return lines;
}

std::vector<CorpusPair> read_corpus_tsv(std::istream& in, const AttributeTable& table) {
  std::vector<CorpusPair> pairs;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty()) continue;
    auto tab = raw.find('\t');
    if (tab == std::string::npos || raw.find('\t', tab + 1) != std::string::npos)
      throw DataError("corpus line " + std::to_string(line_no) + ": expected text<TAB>ipa");
    try {
      pairs.push_back({raw.substr(0, tab), parse_ipa(std::string_view(raw).substr(tab + 1), table)});
    } catch (const DataError& e) {
      throw DataError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return pairs;
}

void write_corpus_tsv(std::ostream& out, const std::vector<CorpusPair>& pairs) {
  for (const auto& p : pairs) {
    if (p.text.find('\t') != std::string::npos || p.text.find('\n') != std::string::npos)
      throw DataError("corpus text contains a tab or newline: " + p.text);
    out << p.text << '\t' << render(p.pronunciation) << '\n';
  }
}

}  // namespace ipakit
