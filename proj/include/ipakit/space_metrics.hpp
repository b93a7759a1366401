#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "ipakit/ipa_inventory.hpp"

namespace ipakit {

/// Embedding vector per phoneme, rows ordered by attribute-table order.
/// Retrieval ties break by this row order. Keeps a pointer to the table,
/// which must outlive the space.
class PhonemeSpace {
 public:
  /// `embeddings` holds one row per token id of `table` (V x D, as produced
  /// by an embedding layer). Only phonemes in `symbols` are kept; an empty
  /// list keeps every phoneme of the table.
  PhonemeSpace(const AttributeTable& table, const Eigen::MatrixXd& embeddings,
               const std::vector<std::string>& symbols = {});
  /// Explicit points, one per symbol (symbols must be table phonemes).
  PhonemeSpace(const AttributeTable& table, std::vector<std::string> symbols, Eigen::MatrixXd points);

  const AttributeTable& table() const noexcept { return *table_; }
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }
  const Eigen::MatrixXd& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return symbols_.size(); }
  const Phoneme& phoneme(std::size_t i) const { return *table_->phoneme(symbols_[i]); }

  std::vector<std::size_t> consonants() const;
  std::vector<std::size_t> vowels() const;
  double distance(std::size_t i, std::size_t j) const { return (points_.row(i) - points_.row(j)).norm(); }

 private:
  const AttributeTable* table_;
  std::vector<std::string> symbols_;
  Eigen::MatrixXd points_;
};

struct SilhouetteScores {
  double consonant = 0.0;
  double vowel = 0.0;
};

/// Mean silhouette coefficient of the consonant and vowel clusters.
/// Throws DataError when either cluster has fewer than 2 members.
SilhouetteScores silhouette(const PhonemeSpace& space);

enum class ConsonantAttribute { Voicing, Place, Manner };

/// AP over a ranked list: sum over k of Precision@k times the
/// Recall increment at k. `relevant[k]` flags the k-th retrieved item.
double average_precision(const std::vector<bool>& relevant, std::size_t relevant_total);

/// Other consonants ranked by ascending distance to `query` (ties by table order).
std::vector<std::size_t> consonant_ranking(const PhonemeSpace& space, std::size_t query);

bool shares_attribute(const Phoneme& a, const Phoneme& b, ConsonantAttribute attribute);

/// AP of one query consonant. Throws DataError when no other consonant
/// shares the attribute with the query.
double query_average_precision(const PhonemeSpace& space, std::string_view query,
                               ConsonantAttribute attribute);

/// Mean AP over all consonant queries that have at least one relevant item.
double attribute_map(const PhonemeSpace& space, ConsonantAttribute attribute);

enum class VowelAxis { Height, Backness, Roundedness };

struct VowelChartPoint {
  double height = 0.0;
  double backness = 0.0;
  double roundedness = 0.0;
};

VowelChartPoint chart_point(const Phoneme& vowel);
double axis_coordinate(const Phoneme& vowel, VowelAxis axis);

/// Vowels sharing one attribute value with the target, ordered by ascending
/// |axis coordinate difference| (equal differences tie; table order within a
/// tie). `distance[i]` is that difference for `vowels[i]`.
struct GroundTruthRanking {
  std::string shared_attribute;  // "height", "backness" or "roundedness"
  std::vector<std::string> vowels;
  std::vector<double> distance;
};

/// The two ground-truth rankings of `target` along `axis`, restricted to
/// `vowel_set` (all table vowels when empty). Slices with fewer than two
/// vowels are omitted.
std::vector<GroundTruthRanking> vowel_ground_truth_rankings(std::string_view target, VowelAxis axis,
                                                            const AttributeTable& table,
                                                            const std::vector<std::string>& vowel_set = {});

struct SpearmanResult {
  double value = 0.0;
  bool degenerate = false;  // a ranking has zero variance; value is 0
};

/// Pearson correlation of tie-averaged ranks of two score vectors.
SpearmanResult spearman(const std::vector<double>& a, const std::vector<double>& b);

/// Tie-averaged ranks (1-based) of the values.
std::vector<double> average_ranks(const std::vector<double>& values);

/// Mean Spearman correlation between each vowel's ground-truth rankings and
/// the embedding-distance ranking of the same vowels. Ground truths with no
/// variance are skipped.
double vowel_rank_correlation(const PhonemeSpace& space, VowelAxis axis);

struct MetricReport {
  SilhouetteScores silhouette;
  double map_voicing = 0.0;
  double map_place = 0.0;
  double map_manner = 0.0;
  double rc_height = 0.0;
  double rc_backness = 0.0;
  double rc_roundedness = 0.0;
};

MetricReport evaluate_space(const PhonemeSpace& space);

/// Named rows: silhouette_consonant ... rc_roundedness.
void write_metric_report(std::ostream& out, const MetricReport& report);

struct PcaResult {
  std::vector<std::string> symbols;
  std::vector<bool> is_consonant;
  Eigen::MatrixXd coordinates;  // n x k'
  Eigen::VectorXd eigenvalues;  // k', descending
  Eigen::MatrixXd components;   // D x k', unit columns
  bool rank_deficient = false;  // fewer than the requested components
};

/// Top-k principal components of the mean-centred points (sample covariance),
/// via cyclic Jacobi rotations. Each component's largest-magnitude entry is
/// made positive.
PcaResult pca_export(const PhonemeSpace& space, std::size_t k = 3);
PcaResult pca(const Eigen::MatrixXd& points, std::size_t k);

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi sweeps,
/// eigenvalues descending.
struct SymmetricEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  int sweeps = 0;
};
SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& symmetric, double tolerance = 1e-10, int max_sweeps = 100);

void write_pca_tsv(std::ostream& out, const PcaResult& result);

}  // namespace ipakit
