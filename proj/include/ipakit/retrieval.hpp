#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ipakit/lexicon.hpp"
#include "ipakit/nonword.hpp"
#include "ipakit/student.hpp"

namespace ipakit {

inline constexpr const char* kPromptPrefix = "ə ˈfoʊˌtoʊ əv ";

/// "a photo of <label>" in IPA: the prefix tokens followed by the label.
PronunciationSequence prompt(const PronunciationSequence& label, const AttributeTable& table);

using Encoder = std::function<Eigen::VectorXd(const PronunciationSequence&)>;

/// Pooled, projected output of a trained student.
Encoder model_encoder(const StudentModel<float>& model);

struct EmbeddedClass {
  std::string label;
  Eigen::VectorXd prompt_embedding;
  std::vector<Eigen::VectorXd> image_embeddings;
};

/// Cosine similarity; -infinity when either vector has zero norm.
double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct Classification {
  std::size_t index = 0;
  std::string label;
  bool zero_norm = false;  // some candidate (or the query) had zero norm
};

/// Class whose prompt embedding is most cosine-similar; ties go to the first.
Classification classify(const Eigen::VectorXd& image, const std::vector<EmbeddedClass>& classes);

/// Fraction of all class images classified as their own class.
double classification_accuracy(const std::vector<EmbeddedClass>& classes);

/// Elementwise mean of the raw vectors.
Eigen::VectorXd fuse(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

enum class RetrievalTarget { Images, Texts };

struct GroupMetric {
  std::size_t count = 0;
  double mean = 0.0;  // Recall@K (Images) or top-1 accuracy (Texts)
};

struct NonwordRetrievalReport {
  RetrievalTarget target = RetrievalTarget::Texts;
  std::size_t k = 0;           // cutoff and denominator (Images)
  std::size_t pool_size = 0;   // images or class prompts ranked per query
  std::array<GroupMetric, 3> by_shared;  // index = shared attribute count
  GroupMetric overall;
  std::vector<double> per_query;  // in nonword order
};

/// Embeds prompt(nonword) with the encoder and ranks the pooled images of all
/// classes (Images, Recall@k with denominator k) or the class prompts (Texts,
/// top-1 accuracy). Ranking ties break by pool order.
NonwordRetrievalReport nonword_retrieval(const std::vector<Nonword>& nonwords,
                                         const std::vector<EmbeddedClass>& classes, RetrievalTarget target,
                                         const Encoder& encoder, const AttributeTable& table,
                                         std::size_t k = 50, unsigned jobs = 1);

void write_retrieval_report(std::ostream& out, const NonwordRetrievalReport& report);

struct HumanSimilarityTrial {
  std::string target;
  std::vector<std::pair<std::string, double>> rows;  // (comparison word, human score)
};

/// TSV "target<TAB>comparison<TAB>score"; one target per file, at least two rows.
HumanSimilarityTrial read_human_trial(std::istream& in);

struct HumanCorrelation {
  double value = 0.0;
  bool degenerate = false;
  std::vector<std::string> excluded;  // comparison words without a pronunciation
};

/// Spearman correlation between encoder cosine similarities to the target and
/// the human scores. Throws DataError when the target cannot be converted or
/// fewer than two comparisons remain.
HumanCorrelation human_similarity_correlation(const HumanSimilarityTrial& trial, const Encoder& encoder,
                                              const PronunciationDictionary& dict, const AttributeTable& table);

}  // namespace ipakit
