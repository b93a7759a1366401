#include "ipakit/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <thread>

#include "ipakit/error.hpp"
#include "ipakit/space_metrics.hpp"

namespace ipakit {

PronunciationSequence prompt(const PronunciationSequence& label, const AttributeTable& table) {
  PronunciationSequence out = parse_ipa(kPromptPrefix, table);
  out.tokens.insert(out.tokens.end(), label.tokens.begin(), label.tokens.end());
  return out;
}

Encoder model_encoder(const StudentModel<float>& model) {
  return [&model](const PronunciationSequence& seq) -> Eigen::VectorXd {
    return model.forward(model.encode(seq)).cast<double>().transpose();
  };
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw DataError("cosine: dimension mismatch");
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return -std::numeric_limits<double>::infinity();
  return a.dot(b) / (na * nb);
}

Classification classify(const Eigen::VectorXd& image, const std::vector<EmbeddedClass>& classes) {
  if (classes.empty()) throw DataError("classify: no classes");
  Classification best;
  double best_score = 0.0;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const double s = cosine(image, classes[i].prompt_embedding);
    if (std::isinf(s)) best.zero_norm = true;
    if (i == 0 || s > best_score) {
      best_score = s;
      best.index = i;
    }
  }
  best.label = classes[best.index].label;
  return best;
}

double classification_accuracy(const std::vector<EmbeddedClass>& classes) {
  std::size_t total = 0, correct = 0;
  for (std::size_t c = 0; c < classes.size(); ++c)
    for (const auto& img : classes[c].image_embeddings) {
      ++total;
      correct += classify(img, classes).index == c;
    }
  if (total == 0) throw DataError("classification: no images");
  return static_cast<double>(correct) / static_cast<double>(total);
}

Eigen::VectorXd fuse(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw DataError("fuse: dimension mismatch");
  return (a + b) / 2.0;
}

namespace {

// Indices sorted by descending score, stable so ties keep pool order.
std::vector<std::size_t> rank_descending(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

NonwordRetrievalReport nonword_retrieval(const std::vector<Nonword>& nonwords,
                                         const std::vector<EmbeddedClass>& classes, RetrievalTarget target,
                                         const Encoder& encoder, const AttributeTable& table, std::size_t k,
                                         unsigned jobs) {
  if (classes.empty()) throw DataError("nonword retrieval: no classes");
  if (target == RetrievalTarget::Images && k == 0) throw DataError("nonword retrieval: k must be positive");

  std::vector<std::size_t> source(nonwords.size());
  for (std::size_t i = 0; i < nonwords.size(); ++i) {
    auto it = std::find_if(classes.begin(), classes.end(),
                           [&](const EmbeddedClass& c) { return c.label == nonwords[i].source_label; });
    if (it == classes.end()) throw DataError("nonword '" + nonwords[i].spelling + "': missing source class '" +
                                             nonwords[i].source_label + "'");
    if (nonwords[i].shared_attribute_count < 0 || nonwords[i].shared_attribute_count > 2)
      throw DataError("nonword '" + nonwords[i].spelling + "': shared attribute count out of range");
    source[i] = static_cast<std::size_t>(it - classes.begin());
  }

  std::vector<const Eigen::VectorXd*> pool;
  std::vector<std::size_t> pool_class;
  for (std::size_t c = 0; c < classes.size(); ++c)
    for (const auto& img : classes[c].image_embeddings) {
      pool.push_back(&img);
      pool_class.push_back(c);
    }

  NonwordRetrievalReport report;
  report.target = target;
  report.k = k;
  report.pool_size = target == RetrievalTarget::Images ? pool.size() : classes.size();
  report.per_query.assign(nonwords.size(), 0.0);

  auto score_one = [&](std::size_t i) {
    const Eigen::VectorXd q = encoder(prompt(nonwords[i].pronunciation, table));
    if (target == RetrievalTarget::Texts) return classify(q, classes).index == source[i] ? 1.0 : 0.0;
    std::vector<double> scores(pool.size());
    for (std::size_t j = 0; j < pool.size(); ++j) scores[j] = cosine(q, *pool[j]);
    const auto order = rank_descending(scores);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < std::min(k, order.size()); ++r) hits += pool_class[order[r]] == source[i];
    return static_cast<double>(hits) / static_cast<double>(k);
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, nonwords.size()))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < nonwords.size(); ++i) report.per_query[i] = score_one(i);
  } else {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < jobs; ++w)
      workers.emplace_back([&, w] {
        for (std::size_t i = w; i < nonwords.size(); i += jobs) report.per_query[i] = score_one(i);
      });
  }

  for (std::size_t i = 0; i < nonwords.size(); ++i) {
    auto& g = report.by_shared[static_cast<std::size_t>(nonwords[i].shared_attribute_count)];
    ++g.count;
    g.mean += report.per_query[i];
    ++report.overall.count;
    report.overall.mean += report.per_query[i];
  }
  for (auto* g : {&report.by_shared[0], &report.by_shared[1], &report.by_shared[2], &report.overall})
    if (g->count > 0) g->mean /= static_cast<double>(g->count);
  return report;
}

void write_retrieval_report(std::ostream& out, const NonwordRetrievalReport& report) {
  const bool images = report.target == RetrievalTarget::Images;
  const std::string metric = images ? "recall@" + std::to_string(report.k) : "top1_accuracy";
  out << "# target\t" << (images ? "images" : "texts") << '\n';
  out << "# pool_size\t" << report.pool_size << '\n';
  out << "metric\tgroup\tcount\tvalue\n";
  out.precision(10);
  for (std::size_t s = 0; s < report.by_shared.size(); ++s)
    out << metric << "\tshared_" << s << '\t' << report.by_shared[s].count << '\t' << report.by_shared[s].mean
        << '\n';
  out << metric << "\tall\t" << report.overall.count << '\t' << report.overall.mean << '\n';
}

HumanSimilarityTrial read_human_trial(std::istream& in) {
  HumanSimilarityTrial trial;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty() || raw.front() == '#') continue;
    const auto where = "human trial line " + std::to_string(line_no) + ": ";
    const auto t1 = raw.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : raw.find('\t', t1 + 1);
    if (t2 == std::string::npos || raw.find('\t', t2 + 1) != std::string::npos)
      throw DataError(where + "expected target<TAB>comparison<TAB>score");
    std::string target = raw.substr(0, t1);
    if (trial.target.empty()) trial.target = target;
    else if (target != trial.target) throw DataError(where + "a trial file holds a single target");
    const std::string field = raw.substr(t2 + 1);
    std::size_t used = 0;
    double score = 0.0;
    try {
      score = std::stod(field, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != field.size() || !std::isfinite(score))
      throw DataError(where + "malformed score '" + field + "'");
    trial.rows.emplace_back(raw.substr(t1 + 1, t2 - t1 - 1), score);
  }
  if (trial.rows.size() < 2) throw DataError("human trial needs at least two rows");
  return trial;
}

HumanCorrelation human_similarity_correlation(const HumanSimilarityTrial& trial, const Encoder& encoder,
                                              const PronunciationDictionary& dict, const AttributeTable& table) {
  auto target = convert_sentence(trial.target, dict, table);
  if (!std::holds_alternative<PronunciationSequence>(target))
    throw DataError("human trial target '" + trial.target + "' has no pronunciation");
  const Eigen::VectorXd t = encoder(std::get<PronunciationSequence>(target));

  HumanCorrelation result;
  std::vector<double> sims, human;
  for (const auto& [word, score] : trial.rows) {
    auto conv = convert_sentence(word, dict, table);
    if (!std::holds_alternative<PronunciationSequence>(conv)) {
      result.excluded.push_back(word);
      continue;
    }
    sims.push_back(cosine(t, encoder(std::get<PronunciationSequence>(conv))));
    human.push_back(score);
  }
  if (sims.size() < 2)
    throw DataError("human trial '" + trial.target + "': fewer than two convertible comparisons");
  const auto s = spearman(sims, human);
  result.value = s.value;
  result.degenerate = s.degenerate;
  return result;
}

}  // namespace ipakit
