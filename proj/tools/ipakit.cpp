#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "ipakit/checkpoint.hpp"
#include "ipakit/distill.hpp"
#include "ipakit/error.hpp"
#include "ipakit/lexicon.hpp"
#include "ipakit/nonword.hpp"
#include "ipakit/phoneme_embedding.hpp"
#include "ipakit/retrieval.hpp"
#include "ipakit/space_metrics.hpp"
#include "ipakit/teacher_io.hpp"
#include "manifest.hpp"

#ifndef IPAKIT_VERSION
#define IPAKIT_VERSION "0.0.0"
#endif

namespace ipakit::cli {
namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

// Re-throws module errors with the offending file in front.
template <typename F>
auto with_file(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

const AttributeTable& attribute_table() {
  static const std::unique_ptr<AttributeTable> table = [] {
    const char* path = std::getenv("IPAKIT_ATTR_TABLE");
    if (!path || !*path) return std::make_unique<AttributeTable>(default_attribute_table());
    auto in = open_in(path);
    return std::make_unique<AttributeTable>(with_file(path, [&] { return load_attribute_table(in); }));
  }();
  return *table;
}

PronunciationDictionary load_dict(const std::string& path, bool report_rejects = true) {
  auto in = open_in(path);
  auto load = load_dictionary(in, attribute_table());
  if (report_rejects)
    for (const auto& r : load.rejected)
      std::cerr << "warning: " << path << ":" << r.line << ": skipped (" << r.reason << ")\n";
  return std::move(load.dictionary);
}

std::vector<std::string> load_lines(const std::string& path) {
  auto in = open_in(path);
  return read_lines(in);
}

std::vector<CorpusPair> load_corpus(const std::string& path) {
  auto in = open_in(path);
  return with_file(path, [&] { return read_corpus_tsv(in, attribute_table()); });
}

struct Common {
  std::string dict, wordlist, freq, teacher, images, corpus, checkpoint, report, mode = "ipa-frozen";
  std::string in, out, labels, nonwords, task = "nonword-texts", val_corpus;
  std::vector<std::string> trials;
  std::uint64_t seed = 0;
  int epochs = 50, batch = 32, d_model = 64, layers = 2, heads = 4, max_len = 77, ffn_mult = 4, dim = 64;
  double lr = 5e-5, zipf = 0.0;
  std::size_t val_size = 0, k = 50, components = 3;
  unsigned jobs = 1;
  bool identity = false, fuse_text = false;
};

RunManifest manifest_for(const CLI::App& sub, const Common& c) {
  RunManifest m;
  m.command = sub.get_name();
  m.version = IPAKIT_VERSION;
  m.seed = c.seed;
  for (const auto* opt : sub.get_options()) {
    if (opt->get_name() == "--help") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    m.flags.emplace_back(opt->get_name(), value);
  }
  if (const char* table = std::getenv("IPAKIT_ATTR_TABLE"); table && *table) m.add_input(table);
  return m;
}

StudentConfig student_config(const Common& c, int teacher_dim) {
  StudentConfig config;
  config.mode = parse_embedding_mode(c.mode);
  config.d_model = c.d_model;
  config.layers = c.layers;
  config.heads = c.heads;
  config.ffn_mult = c.ffn_mult;
  config.max_len = c.max_len;
  config.teacher_dim = teacher_dim;
  config.seed = c.seed;
  config.learning_rate = c.lr;
  config.batch_size = c.batch;
  config.epochs = c.epochs;
  return config;
}

std::vector<std::string> corpus_phonemes(const std::vector<CorpusPair>& pairs) {
  std::vector<std::string> out;
  for (const auto& p : pairs)
    for (const auto& t : p.pronunciation.tokens)
      if (attribute_table().phoneme(t) && std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
  return out;
}

PhonemeSpace space_from(const Common& c, RunManifest& m) {
  Eigen::MatrixXd embeddings;
  if (c.identity) {
    embeddings = attribute_matrix(attribute_table());
  } else {
    if (c.checkpoint.empty()) throw CLI::ValidationError("--checkpoint", "required unless --identity is given");
    m.add_input(c.checkpoint);
    embeddings = load_checkpoint_file(c.checkpoint, attribute_table()).token_embeddings();
  }
  std::vector<std::string> keep;
  if (!c.corpus.empty()) {
    m.add_input(c.corpus);
    keep = corpus_phonemes(load_corpus(c.corpus));
  }
  return PhonemeSpace(attribute_table(), embeddings, keep);
}

int run_convert(const CLI::App& sub, const Common& c, bool corpus_mode) {
  auto m = manifest_for(sub, c);
  m.add_input(c.dict);
  m.add_input(c.in);
  const auto dict = load_dict(c.dict);
  const auto sentences = load_lines(c.in);
  std::vector<std::string> words;
  if (corpus_mode && !c.wordlist.empty()) {
    m.add_input(c.wordlist);
    words = load_lines(c.wordlist);
  }
  auto corpus = build_corpus(sentences, dict, attribute_table(), words.empty() ? nullptr : &words, c.jobs);

  std::vector<CorpusPair> train_pairs = std::move(corpus.pairs), val_pairs;
  if (corpus_mode && c.val_size > 0)
    std::tie(train_pairs, val_pairs) = split_validation(std::move(train_pairs), c.val_size, c.seed);
  {
    auto out = open_out(c.out);
    write_corpus_tsv(out, train_pairs);
  }
  if (!val_pairs.empty()) {
    if (c.val_corpus.empty()) throw CLI::ValidationError("--val-out", "required with --val-size");
    auto out = open_out(c.val_corpus);
    write_corpus_tsv(out, val_pairs);
  }
  const auto& r = corpus.report;
  std::ostringstream summary;
  summary << "sentences_kept\t" << r.sentences_kept << "\nsentences_dropped\t" << r.sentences_dropped
          << "\nwords_kept\t" << r.words_kept << "\nwords_dropped\t" << r.words_dropped << '\n';
  if (!c.report.empty()) {
    auto out = open_out(c.report);
    out << summary.str();
    out << "# dropped\tinput\tword\treason\n";
    for (const auto& [input, failure] : r.failures)
      out << "dropped\t" << input << '\t' << failure.word << '\t' << failure.reason << '\n';
  } else {
    std::cerr << summary.str();
  }
  m.write_next_to(c.out);
  return 0;
}

int run_nonwords(const CLI::App& sub, const Common& c) {
  auto m = manifest_for(sub, c);
  m.add_input(c.dict);
  m.add_input(c.labels);
  const auto dict = load_dict(c.dict);
  auto labels = load_lines(c.labels);
  if (!c.freq.empty()) {
    m.add_input(c.freq);
    auto in = open_in(c.freq);
    const auto freq = with_file(c.freq, [&] { return load_frequency_table(in); });
    labels = zipf_filter(labels, freq, c.zipf);
  }
  std::unordered_set<std::string> vocab;
  if (!c.wordlist.empty()) {
    m.add_input(c.wordlist);
    for (auto& w : load_lines(c.wordlist)) vocab.insert(to_lower_ascii(w));
  } else {
    for (const auto& [word, ipa] : dict.entries()) vocab.insert(word);
  }
  const auto known = known_pronunciations(dict, attribute_table());
  std::vector<Nonword> all;
  std::size_t skipped = 0;
  for (const auto& label : labels) {
    try {
      auto n = generate_nonwords(label, dict, attribute_table(), SubstitutionTable::english(), vocab, known);
      std::move(n.begin(), n.end(), std::back_inserter(all));
    } catch (const DataError& e) {
      ++skipped;
      std::cerr << "note: " << e.what() << '\n';
    }
  }
  auto out = open_out(c.out);
  write_nonwords_tsv(out, all);
  std::cerr << all.size() << " nonwords from " << labels.size() - skipped << " labels (" << skipped
            << " skipped)\n";
  m.write_next_to(c.out);
  return 0;
}

int run_train(const CLI::App& sub, const Common& c) {
  auto m = manifest_for(sub, c);
  m.add_input(c.teacher);
  m.add_input(c.corpus);
  const auto teacher = read_teb_file(c.teacher);
  auto pairs = load_corpus(c.corpus);
  std::vector<CorpusPair> val;
  if (!c.val_corpus.empty()) {
    m.add_input(c.val_corpus);
    val = load_corpus(c.val_corpus);
  } else if (c.val_size > 0) {
    std::tie(pairs, val) = split_validation(std::move(pairs), c.val_size, c.seed);
  }
  StudentModel<float> model(student_config(c, static_cast<int>(teacher.dim())), attribute_table());

  std::optional<std::ofstream> log_out;
  if (!c.report.empty()) {
    log_out = open_out(c.report);
    *log_out << "epoch\ttrain_mse\tval_mse\n";
    log_out->precision(10);
  }
  auto log = train(model, pairs, teacher, val, [&](const EpochLog& e) {
    std::cerr << "epoch " << e.epoch << " train_mse " << e.train_mse;
    if (e.val_mse) std::cerr << " val_mse " << *e.val_mse;
    std::cerr << '\n';
    if (log_out) {
      *log_out << e.epoch << '\t' << e.train_mse << '\t';
      if (e.val_mse) *log_out << *e.val_mse;
      *log_out << '\n';
    }
  });
  if (log.truncated > 0)
    std::cerr << "warning: " << log.truncated << " sequences truncated to " << c.max_len << " tokens\n";
  save_checkpoint_file(model, c.checkpoint);
  m.write_next_to(c.checkpoint);
  return 0;
}

int run_eval_space(const CLI::App& sub, const Common& c) {
  auto m = manifest_for(sub, c);
  const auto space = space_from(c, m);
  const auto report = evaluate_space(space);
  if (c.report.empty()) {
    write_metric_report(std::cout, report);
    return 0;
  }
  auto out = open_out(c.report);
  write_metric_report(out, report);
  m.write_next_to(c.report);
  return 0;
}

int run_pca(const CLI::App& sub, const Common& c) {
  auto m = manifest_for(sub, c);
  const auto space = space_from(c, m);
  const auto result = pca_export(space, c.components);
  if (c.report.empty()) {
    write_pca_tsv(std::cout, result);
    return 0;
  }
  auto out = open_out(c.report);
  write_pca_tsv(out, result);
  m.write_next_to(c.report);
  return 0;
}

std::vector<EmbeddedClass> build_classes(const Common& c, RunManifest& m, const Encoder& encoder,
                                         const PronunciationDictionary& dict) {
  std::vector<std::string> labels;
  std::map<std::string, std::vector<Eigen::VectorXd>> images;
  if (!c.images.empty()) {
    m.add_input(c.images);
    const auto image_table = read_teb_file(c.images);
    for (const auto& r : image_table.records()) {
      const auto slash = r.text.rfind('/');
      const std::string label = slash == std::string::npos ? r.text : r.text.substr(0, slash);
      if (!images.count(label)) labels.push_back(label);
      images[label].push_back(Eigen::Map<const Eigen::VectorXf>(r.vector.data(), static_cast<Eigen::Index>(r.vector.size())).cast<double>());
    }
  }
  if (!c.labels.empty()) {
    m.add_input(c.labels);
    labels = load_lines(c.labels);
  }
  if (labels.empty()) throw DataError("no classes: pass --images or --labels");
  std::optional<TeacherTable> text;
  if (c.fuse_text) {
    if (c.teacher.empty()) throw CLI::ValidationError("--teacher", "required with --fuse");
    m.add_input(c.teacher);
    text = read_teb_file(c.teacher);
  }
  std::vector<EmbeddedClass> classes;
  for (const auto& label : labels) {
    auto pron = convert_sentence(label, dict, attribute_table());
    if (!std::holds_alternative<PronunciationSequence>(pron)) {
      std::cerr << "note: class '" << label << "' has no pronunciation; skipped\n";
      continue;
    }
    EmbeddedClass cls{label, encoder(prompt(std::get<PronunciationSequence>(pron), attribute_table())), images[label]};
    if (text) {
      const auto* v = text->find("a photo of " + label);
      if (!v) throw DataError("no teacher vector for 'a photo of " + label + "'");
      cls.prompt_embedding =
          fuse(cls.prompt_embedding, Eigen::Map<const Eigen::VectorXf>(v->data(), static_cast<Eigen::Index>(v->size())).cast<double>());
    }
    classes.push_back(std::move(cls));
  }
  return classes;
}

int run_eval_retrieval(const CLI::App& sub, const Common& c) {
  auto m = manifest_for(sub, c);
  m.add_input(c.checkpoint);
  m.add_input(c.dict);
  const auto model = load_checkpoint_file(c.checkpoint, attribute_table());
  const auto dict = load_dict(c.dict, false);
  const auto encoder = model_encoder(model);
  const auto classes = build_classes(c, m, encoder, dict);

  std::ostringstream out;
  out.precision(10);
  if (c.task == "classify") {
    std::size_t n = 0;
    for (const auto& cls : classes) n += cls.image_embeddings.size();
    out << "# target\tclassify\n# pool_size\t" << classes.size() << "\nmetric\tgroup\tcount\tvalue\n"
        << "accuracy\tall\t" << n << '\t' << classification_accuracy(classes) << '\n';
  } else {
    if (c.nonwords.empty()) throw CLI::ValidationError("--nonwords", "required for nonword tasks");
    m.add_input(c.nonwords);
    auto in = open_in(c.nonwords);
    const auto nonwords = with_file(c.nonwords, [&] { return read_nonwords_tsv(in, dict, attribute_table()); });
    const auto target = c.task == "nonword-images" ? RetrievalTarget::Images : RetrievalTarget::Texts;
    write_retrieval_report(out, nonword_retrieval(nonwords, classes, target, encoder, attribute_table(), c.k, c.jobs));
  }
  if (c.report.empty()) {
    std::cout << out.str();
    return 0;
  }
  open_out(c.report) << out.str();
  m.write_next_to(c.report);
  return 0;
}

int run_eval_human(const CLI::App& sub, const Common& c) {
  auto m = manifest_for(sub, c);
  m.add_input(c.checkpoint);
  m.add_input(c.dict);
  const auto model = load_checkpoint_file(c.checkpoint, attribute_table());
  const auto dict = load_dict(c.dict, false);
  std::ostringstream out;
  out.precision(10);
  out << "target\tspearman\tcompared\texcluded\n";
  for (const auto& path : c.trials) {
    m.add_input(path);
    auto in = open_in(path);
    const auto trial = with_file(path, [&] { return read_human_trial(in); });
    const auto r = with_file(path, [&] {
      return human_similarity_correlation(trial, model_encoder(model), dict, attribute_table());
    });
    std::string excluded;
    for (const auto& w : r.excluded) excluded += (excluded.empty() ? "" : ",") + w;
    out << trial.target << '\t' << r.value << '\t' << trial.rows.size() - r.excluded.size() << '\t' << excluded
        << '\n';
  }
  if (c.report.empty()) {
    std::cout << out.str();
    return 0;
  }
  open_out(c.report) << out.str();
  m.write_next_to(c.report);
  return 0;
}

int run_teacher_synth(const CLI::App& sub, const Common& c) {
  auto m = manifest_for(sub, c);
  std::vector<std::string> texts;
  if (!c.corpus.empty()) {
    m.add_input(c.corpus);
    for (auto& p : load_corpus(c.corpus)) texts.push_back(std::move(p.text));
  }
  if (!c.in.empty()) {
    m.add_input(c.in);
    for (auto& t : load_lines(c.in)) texts.push_back(std::move(t));
  }
  if (texts.empty()) throw CLI::ValidationError("--corpus/--in", "no texts given");
  if (c.dim <= 0) throw CLI::ValidationError("--dim", "must be positive");
  write_teb_file(synthetic_teacher(texts, static_cast<std::uint32_t>(c.dim), c.seed), c.out);
  m.write_next_to(c.out);
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"IPA phoneme embeddings, distillation and evaluation"};
  app.set_version_flag("--version", IPAKIT_VERSION);
  app.require_subcommand(1);
  Common c;

  auto existing = [](CLI::Option* o) { return o->check(CLI::ExistingFile); };
  auto add_jobs = [&](CLI::App* s) { s->add_option("--jobs", c.jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber); };
  auto add_space = [&](CLI::App* s) {
    existing(s->add_option("--checkpoint", c.checkpoint, "trained model"));
    s->add_flag("--identity", c.identity, "use the raw attribute vectors (W = identity)");
    existing(s->add_option("--corpus", c.corpus, "restrict to phonemes occurring in this corpus TSV"));
    s->add_option("--report", c.report, "output TSV (stdout when absent)");
  };

  auto* convert = app.add_subcommand("convert", "sentences to sentence<TAB>IPA pairs");
  existing(convert->add_option("--dict", c.dict)->required());
  existing(convert->add_option("--in", c.in, "one sentence per line")->required());
  convert->add_option("--out", c.out)->required();
  convert->add_option("--report", c.report, "kept/dropped summary and dropped lines");
  add_jobs(convert);

  auto* corpus = app.add_subcommand("corpus", "distillation corpus: sentences plus single words");
  existing(corpus->add_option("--dict", c.dict)->required());
  existing(corpus->add_option("--in", c.in, "one sentence per line")->required());
  existing(corpus->add_option("--wordlist", c.wordlist, "one word per line"));
  corpus->add_option("--out", c.out)->required();
  corpus->add_option("--val-size", c.val_size, "pairs moved to a validation split")->capture_default_str();
  corpus->add_option("--val-out", c.val_corpus, "validation TSV");
  corpus->add_option("--seed", c.seed)->capture_default_str();
  corpus->add_option("--report", c.report);
  add_jobs(corpus);

  auto* nonwords = app.add_subcommand("nonwords", "nonwords by first-consonant substitution");
  existing(nonwords->add_option("--dict", c.dict)->required());
  existing(nonwords->add_option("--labels", c.labels, "one class label per line")->required());
  existing(nonwords->add_option("--freq", c.freq, "word<TAB>zipf"));
  nonwords->add_option("--zipf", c.zipf, "minimum Zipf frequency")->capture_default_str();
  existing(nonwords->add_option("--wordlist", c.wordlist, "known words (default: dictionary words)"));
  nonwords->add_option("--out", c.out)->required();

  auto* train_cmd = app.add_subcommand("train", "distill a student from a teacher table");
  existing(train_cmd->add_option("--teacher", c.teacher)->required());
  existing(train_cmd->add_option("--corpus", c.corpus)->required());
  existing(train_cmd->add_option("--val-corpus", c.val_corpus));
  train_cmd->add_option("--val-size", c.val_size)->capture_default_str();
  train_cmd->add_option("--checkpoint", c.checkpoint, "output model")->required();
  train_cmd->add_option("--mode", c.mode)
      ->capture_default_str()
      ->check(CLI::IsMember({"ipa-frozen", "ipa-trainable", "baseline"}));
  train_cmd->add_option("--seed", c.seed)->capture_default_str();
  train_cmd->add_option("--epochs", c.epochs)->capture_default_str()->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--lr", c.lr)->capture_default_str()->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--batch", c.batch)->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--d-model", c.d_model)->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--layers", c.layers)->capture_default_str()->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--heads", c.heads)->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--ffn-mult", c.ffn_mult)->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--max-len", c.max_len)->capture_default_str()->check(CLI::Range(2, 1 << 20));
  train_cmd->add_option("--report", c.report, "per-epoch loss TSV");

  auto* eval_space = app.add_subcommand("eval-space", "silhouette, attribute mAP and vowel rank correlation");
  add_space(eval_space);

  auto* pca_cmd = app.add_subcommand("pca", "principal-component coordinates of the phoneme space");
  add_space(pca_cmd);
  pca_cmd->add_option("--components", c.components)->capture_default_str()->check(CLI::PositiveNumber);

  auto* retrieval = app.add_subcommand("eval-retrieval", "classification and nonword retrieval");
  existing(retrieval->add_option("--checkpoint", c.checkpoint)->required());
  existing(retrieval->add_option("--dict", c.dict)->required());
  retrieval->add_option("--task", c.task)
      ->capture_default_str()
      ->check(CLI::IsMember({"classify", "nonword-images", "nonword-texts"}));
  existing(retrieval->add_option("--images", c.images, "TEB1 keyed label/index"));
  existing(retrieval->add_option("--labels", c.labels, "class labels, one per line"));
  existing(retrieval->add_option("--nonwords", c.nonwords, "nonword TSV"));
  existing(retrieval->add_option("--teacher", c.teacher, "text teacher for --fuse"));
  retrieval->add_flag("--fuse", c.fuse_text, "average prompts with the teacher's 'a photo of <label>'");
  retrieval->add_option("--k", c.k, "Recall@K cutoff")->capture_default_str()->check(CLI::PositiveNumber);
  retrieval->add_option("--report", c.report);
  add_jobs(retrieval);

  auto* human = app.add_subcommand("eval-human", "rank correlation with human similarity judgements");
  existing(human->add_option("--checkpoint", c.checkpoint)->required());
  existing(human->add_option("--dict", c.dict)->required());
  existing(human->add_option("--trial", c.trials, "target<TAB>comparison<TAB>score files")->required());
  human->add_option("--report", c.report);

  auto* synth = app.add_subcommand("teacher-synth", "deterministic synthetic teacher table");
  existing(synth->add_option("--corpus", c.corpus, "texts from a corpus TSV"));
  existing(synth->add_option("--in", c.in, "texts, one per line"));
  synth->add_option("--dim", c.dim)->capture_default_str();
  synth->add_option("--seed", c.seed)->capture_default_str();
  synth->add_option("--out", c.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*convert) return run_convert(*convert, c, false);
    if (*corpus) return run_convert(*corpus, c, true);
    if (*nonwords) return run_nonwords(*nonwords, c);
    if (*train_cmd) return run_train(*train_cmd, c);
    if (*eval_space) return run_eval_space(*eval_space, c);
    if (*pca_cmd) return run_pca(*pca_cmd, c);
    if (*retrieval) return run_eval_retrieval(*retrieval, c);
    if (*human) return run_eval_human(*human, c);
    if (*synth) return run_teacher_synth(*synth, c);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace
}  // namespace ipakit::cli

int main(int argc, char** argv) { return ipakit::cli::run(argc, argv); }
