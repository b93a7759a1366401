#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "ipakit/error.hpp"
#include "ipakit/lexicon.hpp"
#include "support.hpp"

using namespace ipakit;

namespace {

const AttributeTable& table() { return default_attribute_table(); }

std::string convert(std::string_view text, const PronunciationDictionary& dict) {
  auto r = convert_sentence(text, dict, table());
  if (auto* f = std::get_if<ConversionFailure>(&r)) return "!" + f->word;
  return render(std::get<PronunciationSequence>(r));
}

}  // namespace

TEST_CASE("dictionary load keeps the first variant and reports bad lines") {
  const auto load = test::toy_dictionary_load();
  const auto& dict = load.dictionary;
  REQUIRE(dict.find("read"));
  CHECK(*dict.find("read") == "rid");
  CHECK(dict.contains("photo"));
  CHECK_FALSE(dict.contains("bogus"));
  REQUIRE(load.rejected.size() == 2);
  CHECK(load.rejected[0].text.rfind("bogus", 0) == 0);
  CHECK(load.rejected[1].reason == "missing tab separator");
}

TEST_CASE("first entry wins and words are lowercased") {
  std::istringstream in("Cat\tkæt\ncat\tkɑt\n");
  const auto load = load_dictionary(in, table());
  CHECK(load.dictionary.size() == 1);
  CHECK(*load.dictionary.find("cat") == "kæt");
}

TEST_CASE("sentence conversion") {
  const auto dict = test::toy_dictionary();
  CHECK(convert("A photo of a cat.", dict) == "ə ˈfoʊˌtoʊ əv ə kæt.");
  CHECK(convert("Is this a desk?", dict) == "ɪz ðɪs ə dɛsk?");
  CHECK(convert("It's time.", dict) == "ɪts taɪm.");
  CHECK(convert("The dogs' song", dict) == "ðə dɔgz' sɔŋ");
  CHECK(convert("a photo of 3 cats", dict) == "ə ˈfoʊˌtoʊ əv 3 kæts");
  CHECK(convert("A xylophone", dict) == "!xylophone");
  CHECK(convert("", dict).empty());
}

TEST_CASE("characters outside the table fail the sentence") {
  const auto dict = test::toy_dictionary();
  auto r = convert_sentence("cat; dog", dict, table());
  REQUIRE(std::holds_alternative<ConversionFailure>(r));
  CHECK(std::get<ConversionFailure>(r).word.empty());
}

TEST_CASE("homophones keep distinct token sequences") {
  const auto dict = test::toy_dictionary();
  CHECK(convert("every day", dict) != convert("everyday", dict));
}

TEST_CASE("corpus construction") {
  const auto dict = test::toy_dictionary();
  const auto sentences = test::data_lines("sentences.txt");
  const auto words = test::data_lines("wordlist.txt");
  const auto corpus = build_corpus(sentences, dict, table(), &words);
  CHECK(corpus.report.sentences_kept + corpus.report.sentences_dropped == sentences.size());
  CHECK(corpus.report.sentences_dropped == 2);
  CHECK(corpus.report.words_kept == words.size() - 1);
  CHECK(corpus.report.words_dropped == 1);
  CHECK(corpus.pairs.size() == corpus.report.sentences_kept + corpus.report.words_kept);
  CHECK(corpus.pairs.front().text == sentences.front());
  CHECK(corpus.pairs.back().text == "nest");
  CHECK(corpus.report.failures.back().second.word == "zzyzx");

  for (unsigned jobs : {2u, 3u, 8u, 64u}) {
    const auto parallel = build_corpus(sentences, dict, table(), &words, jobs);
    CHECK(parallel.pairs == corpus.pairs);
    CHECK(parallel.report.failures.size() == corpus.report.failures.size());
  }
}

TEST_CASE("parse and render are a fixed point over the toy corpus") {
  const auto dict = test::toy_dictionary();
  const auto corpus = build_corpus(test::data_lines("sentences.txt"), dict, table());
  for (const auto& p : corpus.pairs) {
    const auto text = render(p.pronunciation);
    CHECK(parse_ipa(text, table()) == p.pronunciation);
  }
  for (const auto& [word, ipa] : dict.entries()) CHECK(render(parse_ipa(render(parse_ipa(ipa, table())), table())) == render(parse_ipa(ipa, table())));
}

TEST_CASE("validation split") {
  const auto dict = test::toy_dictionary();
  const auto pairs = build_corpus(test::data_lines("sentences.txt"), dict, table()).pairs;
  const auto [train, val] = split_validation(pairs, 5, 9);
  CHECK(val.size() == 5);
  CHECK(train.size() == pairs.size() - 5);
  const auto again = split_validation(pairs, 5, 9);
  CHECK(again.first == train);
  CHECK(again.second == val);
  auto all = train;
  all.insert(all.end(), val.begin(), val.end());
  for (const auto& p : pairs) CHECK(std::count(all.begin(), all.end(), p) == std::count(pairs.begin(), pairs.end(), p));
  CHECK_THROWS_AS(split_validation(pairs, pairs.size() + 1, 0), DataError);
}

TEST_CASE("frequency table and Zipf filter") {
  auto in = test::open_data("freq.tsv");
  const auto freq = load_frequency_table(in);
  CHECK(freq.zipf("Cat") == 4.8);
  CHECK(freq.zipf("xylophone") == 0.0);
  const std::vector<std::string> labels{"cat", "goose", "vase", "water window", "water xylophone", "???"};
  CHECK(zipf_filter(labels, freq, 3.5) == std::vector<std::string>{"cat", "water window"});
  CHECK(zipf_filter(labels, freq, 0.0) == labels);
  CHECK(label_words("Water-Window's kit") == std::vector<std::string>{"water", "window's", "kit"});

  auto load = [](const std::string& s) {
    std::istringstream is(s);
    return load_frequency_table(is);
  };
  CHECK_THROWS_AS(load("cat\tfour\n"), DataError);
  CHECK_THROWS_AS(load("cat\t-1\n"), DataError);
  CHECK_THROWS_AS(load("cat 4\n"), DataError);
  CHECK_THROWS_AS(load("cat\tnan\n"), DataError);
}

TEST_CASE("corpus TSV round trip") {
  const auto dict = test::toy_dictionary();
  const auto pairs = build_corpus(test::data_lines("sentences.txt"), dict, table()).pairs;
  std::stringstream buf;
  write_corpus_tsv(buf, pairs);
  const std::string first = buf.str();
  CHECK(read_corpus_tsv(buf, table()) == pairs);
  std::istringstream reread(first);
  std::stringstream again;
  write_corpus_tsv(again, read_corpus_tsv(reread, table()));
  CHECK(again.str() == first);

  std::istringstream bad("no tab here\n");
  CHECK_THROWS_AS(read_corpus_tsv(bad, table()), DataError);
  CHECK_THROWS_AS(write_corpus_tsv(buf, {{"a\tb", {}}}), DataError);
}
