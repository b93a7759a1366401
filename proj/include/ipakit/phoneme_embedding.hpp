#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "ipakit/error.hpp"
#include "ipakit/ipa_inventory.hpp"
#include "ipakit/random.hpp"

namespace ipakit {

/// Standard deviation of the Normal initializer shared by every embedding
/// layer and linear weight.
inline constexpr double kInitStddev = 0.02;

/// Fixed ordering of the attribute dimensions: 21 consonant dimensions
/// (flag, voicing, 8 manners, 11 places), 4 vowel dimensions (flag, height,
/// backness, roundedness), then one categorical dimension per non-phoneme
/// token of the table, in table order.
class AttributeIndex {
 public:
  static constexpr Eigen::Index kConsonantFlag = 0;
  static constexpr Eigen::Index kVoicing = 1;
  static constexpr Eigen::Index kFirstManner = 2;
  static constexpr Eigen::Index kFirstPlace = kFirstManner + static_cast<Eigen::Index>(kMannerCount);
  static constexpr Eigen::Index kVowelFlag = kFirstPlace + static_cast<Eigen::Index>(kPlaceCount);
  static constexpr Eigen::Index kHeight = kVowelFlag + 1;
  static constexpr Eigen::Index kBackness = kVowelFlag + 2;
  static constexpr Eigen::Index kRoundedness = kVowelFlag + 3;
  static constexpr Eigen::Index kFirstOther = kVowelFlag + 4;

  explicit AttributeIndex(const AttributeTable& table);

  Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(labels_.size()); }
  const std::string& label(Eigen::Index i) const { return labels_.at(static_cast<std::size_t>(i)); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  static constexpr Eigen::Index manner(Manner m) { return kFirstManner + static_cast<Eigen::Index>(m); }
  static constexpr Eigen::Index place(Place p) { return kFirstPlace + static_cast<Eigen::Index>(p); }
  /// Dimension of the i-th non-phoneme token of the table.
  static constexpr Eigen::Index other(std::size_t i) { return kFirstOther + static_cast<Eigen::Index>(i); }

 private:
  std::vector<std::string> labels_;
};

/// Sparse magnitude vector x of a token (dense storage, at most 6 nonzeros).
Eigen::VectorXd attribute_vector(std::string_view token, const AttributeTable& table);

/// All attribute vectors as rows, indexed by token id (V x N).
Eigen::MatrixXd attribute_matrix(const AttributeTable& table);

enum class FeatureMode { Frozen, Trainable };

/// The N x D feature matrix W: a phoneme embedding is x^T W.
template <typename Scalar>
struct FeatureMatrix {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Matrix weights;
  FeatureMode mode = FeatureMode::Frozen;
  std::uint64_t seed = 0;

  static FeatureMatrix random(Eigen::Index attributes, Eigen::Index dim, FeatureMode mode,
                              std::uint64_t seed) {
    Rng rng(seed);
    return {random_normal<Scalar>(attributes, dim, kInitStddev, rng), mode, seed};
  }
};

/// Ordinary lookup embedding: one independent row per token symbol (V x D).
template <typename Scalar>
struct BaselineTable {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Matrix weights;

  static BaselineTable random(Eigen::Index vocab, Eigen::Index dim, std::uint64_t seed) {
    Rng rng(seed);
    return {random_normal<Scalar>(vocab, dim, kInitStddev, rng)};
  }
};

template <typename Scalar>
Eigen::Matrix<Scalar, 1, Eigen::Dynamic> embed_token(std::string_view token,
                                                     const FeatureMatrix<Scalar>& w,
                                                     const AttributeTable& table) {
  const Eigen::VectorXd x = attribute_vector(token, table);
  if (x.size() != w.weights.rows())
    throw DataError("feature matrix has " + std::to_string(w.weights.rows()) +
                    " rows, attribute index has " + std::to_string(x.size()));
  return x.cast<Scalar>().transpose() * w.weights;
}

/// One embedding per token, as rows (L x D).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> embed_sequence(
    const PronunciationSequence& seq, const FeatureMatrix<Scalar>& w, const AttributeTable& table) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(static_cast<Eigen::Index>(seq.size()),
                                                            w.weights.cols());
  for (std::size_t i = 0; i < seq.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = embed_token(seq[i], w, table);
  return out;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> embed_sequence(
    const PronunciationSequence& seq, const BaselineTable<Scalar>& layer, const AttributeTable& table) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(static_cast<Eigen::Index>(seq.size()),
                                                            layer.weights.cols());
  for (std::size_t i = 0; i < seq.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) =
        layer.weights.row(static_cast<Eigen::Index>(table.require_token_id(seq[i])));
  return out;
}

}  // namespace ipakit
