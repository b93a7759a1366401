#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ipakit/ipa_inventory.hpp"

namespace ipakit {

enum class EmbeddingMode : std::uint32_t { IpaFrozen = 0, IpaTrainable = 1, Baseline = 2 };

std::string to_string(EmbeddingMode mode);
/// Accepts "ipa-frozen", "ipa-trainable", "baseline".
EmbeddingMode parse_embedding_mode(std::string_view name);

struct StudentConfig {
  EmbeddingMode mode = EmbeddingMode::IpaFrozen;
  int d_model = 64;
  int layers = 2;
  int heads = 4;
  int ffn_mult = 4;
  int max_len = 77;
  int teacher_dim = 0;
  std::uint64_t seed = 0;
  double learning_rate = 5e-5;
  int batch_size = 32;
  int epochs = 50;

  /// Throws DataError on inconsistent sizes.
  void validate() const;
};

template <typename Scalar>
struct LayerParams {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  // Weights are (in x out) and act on row vectors; biases are 1 x out.
  // The key projection has no bias: it would only shift each score row by a
  // constant, which softmax ignores.
  Matrix wq, bq, wk, wv, bv, wo, bo;
  Matrix ln1_g, ln1_b;
  Matrix w1, b1, w2, b2;
  Matrix ln2_g, ln2_b;
};

template <typename Scalar>
struct StudentParams {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Matrix token;  // W (N x N) in IPA modes, lookup table (V x d_model) in Baseline
  Matrix proj;   // N x d_model; empty when N == d_model or in Baseline
  Matrix pos;    // max_len x d_model
  std::vector<LayerParams<Scalar>> layers;
  Matrix out_w, out_b;

  /// Every tensor with its checkpoint name, in a fixed order (proj only
  /// when non-empty).
  std::vector<std::pair<std::string, Matrix*>> named();
  std::vector<std::pair<std::string, const Matrix*>> named() const;

  StudentParams zeros_like() const;
};

using TokenIds = std::vector<int>;

template <typename Scalar>
class StudentModel {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  /// Fresh model; every weight matrix is Normal(0, 0.02^2) from config.seed,
  /// biases 0, layer-norm gains 1. The table must outlive the model.
  StudentModel(const StudentConfig& config, const AttributeTable& table);
  /// Model around given parameters (shapes are checked).
  StudentModel(const StudentConfig& config, const AttributeTable& table, StudentParams<Scalar> params);

  const StudentConfig& config() const noexcept { return config_; }
  StudentConfig& config() noexcept { return config_; }
  const AttributeTable& table() const noexcept { return *table_; }
  int attribute_count() const noexcept { return attributes_; }
  int vocab_size() const noexcept { return static_cast<int>(table_->size()); }

  const StudentParams<Scalar>& params() const noexcept { return params_; }
  StudentParams<Scalar>& params() noexcept { return params_; }
  /// Name-matched subset of params() that training updates.
  std::vector<std::pair<std::string, Matrix*>> trainable();
  bool is_trainable(const std::string& name) const;

  /// Token ids truncated to max_len. Throws DataError on an empty sequence
  /// or a token outside the table.
  TokenIds encode(const PronunciationSequence& seq, bool* truncated = nullptr) const;

  RowVector forward(const TokenIds& ids) const;
  /// One output row per sequence.
  Matrix forward(const std::vector<PronunciationSequence>& batch) const;

  /// MSE of the batch against `targets` (B x teacher_dim); adds the
  /// gradient of that loss into `grads`.
  Scalar loss_and_gradient(const std::vector<TokenIds>& batch, const Matrix& targets,
                           StudentParams<Scalar>& grads) const;

  /// Token-layer outputs, one row per token id: x^T W in IPA modes (before the
  /// input projection), the lookup rows in Baseline.
  Eigen::MatrixXd token_embeddings() const;

  template <typename Other>
  StudentModel<Other> cast() const;

 private:
  struct LayerCache;
  struct Cache;
  RowVector run(const TokenIds& ids, Cache* cache) const;
  void backprop(const Cache& cache, const RowVector& dy, StudentParams<Scalar>& grads) const;
  void check_shapes() const;

  StudentConfig config_;
  const AttributeTable* table_;
  int attributes_;
  Matrix attribute_rows_;  // V x N
  StudentParams<Scalar> params_;
};

extern template class StudentModel<float>;
extern template class StudentModel<double>;
extern template struct StudentParams<float>;
extern template struct StudentParams<double>;

template <typename Scalar>
template <typename Other>
StudentModel<Other> StudentModel<Scalar>::cast() const {
  StudentParams<Other> p;
  auto src = params_.named();
  p.layers.resize(params_.layers.size());
  p.proj.resize(params_.proj.rows(), params_.proj.cols());
  auto dst = p.named();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].second = src[i].second->template cast<Other>();
  return StudentModel<Other>(config_, *table_, std::move(p));
}

}  // namespace ipakit
