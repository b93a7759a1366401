#include "ipakit/student.hpp"

#include <cmath>
#include <numbers>

#include "ipakit/error.hpp"
#include "ipakit/phoneme_embedding.hpp"
#include "ipakit/random.hpp"

namespace ipakit {

std::string to_string(EmbeddingMode mode) {
  switch (mode) {
    case EmbeddingMode::IpaFrozen: return "ipa-frozen";
    case EmbeddingMode::IpaTrainable: return "ipa-trainable";
    case EmbeddingMode::Baseline: return "baseline";
  }
  return "unknown";
}

EmbeddingMode parse_embedding_mode(std::string_view name) {
  if (name == "ipa-frozen") return EmbeddingMode::IpaFrozen;
  if (name == "ipa-trainable") return EmbeddingMode::IpaTrainable;
  if (name == "baseline") return EmbeddingMode::Baseline;
  throw DataError("unknown mode '" + std::string(name) + "'");
}

void StudentConfig::validate() const {
  auto fail = [](const std::string& m) { throw DataError("student config: " + m); };
  if (d_model <= 0) fail("d_model must be positive");
  if (layers < 0) fail("layers must be non-negative");
  if (heads <= 0 || d_model % heads != 0) fail("d_model must be divisible by heads");
  if (ffn_mult <= 0) fail("ffn_mult must be positive");
  if (max_len < 2) fail("max_len must be at least 2");
  if (teacher_dim <= 0) fail("teacher_dim must be positive");
  if (batch_size <= 0) fail("batch_size must be positive");
  if (epochs < 0) fail("epochs must be non-negative");
  if (!std::isfinite(learning_rate) || learning_rate < 0) fail("learning rate must be finite and non-negative");
}

template <typename Scalar>
std::vector<std::pair<std::string, typename StudentParams<Scalar>::Matrix*>> StudentParams<Scalar>::named() {
  std::vector<std::pair<std::string, Matrix*>> out{{"token", &token}};
  if (proj.size() > 0) out.emplace_back("proj", &proj);
  out.emplace_back("pos", &pos);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& p = layers[l];
    const std::string pre = "layer" + std::to_string(l) + ".";
    for (auto [name, m] : {std::pair{"wq", &p.wq}, {"bq", &p.bq}, {"wk", &p.wk}, {"wv", &p.wv}, {"bv", &p.bv},
                           {"wo", &p.wo}, {"bo", &p.bo}, {"ln1_g", &p.ln1_g}, {"ln1_b", &p.ln1_b},
                           {"w1", &p.w1}, {"b1", &p.b1}, {"w2", &p.w2}, {"b2", &p.b2},
                           {"ln2_g", &p.ln2_g}, {"ln2_b", &p.ln2_b}})
      out.emplace_back(pre + name, m);
  }
  out.emplace_back("out_w", &out_w);
  out.emplace_back("out_b", &out_b);
  return out;
}

template <typename Scalar>
std::vector<std::pair<std::string, const typename StudentParams<Scalar>::Matrix*>> StudentParams<Scalar>::named()
    const {
  auto mutable_list = const_cast<StudentParams*>(this)->named();
  return {mutable_list.begin(), mutable_list.end()};
}

template <typename Scalar>
StudentParams<Scalar> StudentParams<Scalar>::zeros_like() const {
  StudentParams z = *this;
  for (auto& [name, m] : z.named()) m->setZero();
  return z;
}

template <typename Scalar>
struct StudentModel<Scalar>::LayerCache {
  Matrix h_in, q, k, v, attn, x1_hat, h1, f1, g, x2_hat;
  std::vector<Matrix> probs;  // per head, L x L
  RowVector rstd1, rstd2;     // stored as 1 x L
};

template <typename Scalar>
struct StudentModel<Scalar>::Cache {
  TokenIds ids;
  Matrix token_out;  // L x D token-layer output
  std::vector<LayerCache> layers;
  Matrix h_last;
  RowVector pooled;
};

namespace {

template <typename Matrix>
Matrix add_row(const Matrix& m, const Matrix& row) {
  return m.rowwise() + row.row(0);
}

constexpr double kLayerNormEps = 1e-12;

template <typename Scalar, typename Matrix, typename RowVector>
Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, Matrix& x_hat, RowVector& rstd) {
  const Eigen::Index n = x.cols();
  x_hat.resize(x.rows(), n);
  rstd.resize(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar mean = x.row(r).mean();
    const auto centered = (x.row(r).array() - mean).matrix();
    const Scalar var = centered.squaredNorm() / static_cast<Scalar>(n);
    rstd(r) = Scalar(1) / std::sqrt(var + static_cast<Scalar>(kLayerNormEps));
    x_hat.row(r) = centered * rstd(r);
  }
  Matrix y = x_hat.array().rowwise() * gain.row(0).array();
  return y.rowwise() + bias.row(0);
}

template <typename Matrix, typename RowVector>
Matrix layer_norm_backward(const Matrix& dy, const Matrix& gain, const Matrix& x_hat, const RowVector& rstd,
                           Matrix& dgain, Matrix& dbias) {
  dgain += (dy.array() * x_hat.array()).colwise().sum().matrix();
  dbias += dy.colwise().sum();
  const Matrix dx_hat = dy.array().rowwise() * gain.row(0).array();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const auto mean_d = dx_hat.row(r).mean();
    const auto mean_dx = dx_hat.row(r).dot(x_hat.row(r)) / static_cast<typename Matrix::Scalar>(dy.cols());
    dx.row(r) = rstd(r) * (dx_hat.row(r).array() - mean_d - x_hat.row(r).array() * mean_dx).matrix();
  }
  return dx;
}

template <typename Scalar>
Scalar gelu(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x / std::numbers::sqrt2_v<Scalar>));
}

template <typename Scalar>
Scalar gelu_grad(Scalar x) {
  const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x / std::numbers::sqrt2_v<Scalar>));
  const Scalar pdf = std::exp(Scalar(-0.5) * x * x) / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
  return cdf + x * pdf;
}

template <typename Matrix>
void softmax_rows(Matrix& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const auto mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp().matrix();
    s.row(r) /= s.row(r).sum();
  }
}

}  // namespace

template <typename Scalar>
StudentModel<Scalar>::StudentModel(const StudentConfig& config, const AttributeTable& table)
    : config_(config), table_(&table) {
  config_.validate();
  const AttributeIndex index(table);
  attributes_ = static_cast<int>(index.size());
  attribute_rows_ = attribute_matrix(table).cast<Scalar>();

  const Eigen::Index d = config_.d_model, f = config_.d_model * config_.ffn_mult;
  Rng rng(config_.seed);
  auto normal = [&](Eigen::Index r, Eigen::Index c) { return random_normal<Scalar>(r, c, kInitStddev, rng); };
  auto zeros = [](Eigen::Index c) { return Matrix::Zero(1, c); };
  auto ones = [](Eigen::Index c) { return Matrix::Ones(1, c); };

  if (config_.mode == EmbeddingMode::Baseline) {
    params_.token = normal(vocab_size(), d);
  } else {
    params_.token = normal(attributes_, attributes_);
    if (attributes_ != d) params_.proj = normal(attributes_, d);
  }
  params_.pos = normal(config_.max_len, d);
  params_.layers.resize(static_cast<std::size_t>(config_.layers));
  for (auto& p : params_.layers) {
    p.wq = normal(d, d);
    p.bq = zeros(d);
    p.wk = normal(d, d);
    p.wv = normal(d, d);
    p.bv = zeros(d);
    p.wo = normal(d, d);
    p.bo = zeros(d);
    p.ln1_g = ones(d);
    p.ln1_b = zeros(d);
    p.w1 = normal(d, f);
    p.b1 = zeros(f);
    p.w2 = normal(f, d);
    p.b2 = zeros(d);
    p.ln2_g = ones(d);
    p.ln2_b = zeros(d);
  }
  params_.out_w = normal(d, config_.teacher_dim);
  params_.out_b = zeros(config_.teacher_dim);
}

template <typename Scalar>
StudentModel<Scalar>::StudentModel(const StudentConfig& config, const AttributeTable& table,
                                   StudentParams<Scalar> params)
    : config_(config), table_(&table), params_(std::move(params)) {
  config_.validate();
  attributes_ = static_cast<int>(AttributeIndex(table).size());
  attribute_rows_ = attribute_matrix(table).cast<Scalar>();
  check_shapes();
}

template <typename Scalar>
void StudentModel<Scalar>::check_shapes() const {
  const Eigen::Index d = config_.d_model, f = config_.d_model * config_.ffn_mult;
  auto expect = [](const Matrix& m, Eigen::Index r, Eigen::Index c, const std::string& name) {
    if (m.rows() != r || m.cols() != c)
      throw DataError("tensor " + name + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                      ", expected " + std::to_string(r) + "x" + std::to_string(c));
  };
  const bool baseline = config_.mode == EmbeddingMode::Baseline;
  if (baseline) {
    expect(params_.token, vocab_size(), d, "token");
  } else {
    expect(params_.token, attributes_, attributes_, "token");
  }
  const bool want_proj = !baseline && attributes_ != d;
  if (want_proj) expect(params_.proj, attributes_, d, "proj");
  else if (params_.proj.size() != 0) throw DataError("unexpected tensor proj");
  expect(params_.pos, config_.max_len, d, "pos");
  if (params_.layers.size() != static_cast<std::size_t>(config_.layers))
    throw DataError("model has " + std::to_string(params_.layers.size()) + " layers, config says " +
                    std::to_string(config_.layers));
  for (const auto& p : params_.layers) {
    expect(p.wq, d, d, "wq");
    expect(p.bq, 1, d, "bq");
    expect(p.wk, d, d, "wk");
    expect(p.wv, d, d, "wv");
    expect(p.bv, 1, d, "bv");
    expect(p.wo, d, d, "wo");
    expect(p.bo, 1, d, "bo");
    expect(p.ln1_g, 1, d, "ln1_g");
    expect(p.ln1_b, 1, d, "ln1_b");
    expect(p.w1, d, f, "w1");
    expect(p.b1, 1, f, "b1");
    expect(p.w2, f, d, "w2");
    expect(p.b2, 1, d, "b2");
    expect(p.ln2_g, 1, d, "ln2_g");
    expect(p.ln2_b, 1, d, "ln2_b");
  }
  expect(params_.out_w, d, config_.teacher_dim, "out_w");
  expect(params_.out_b, 1, config_.teacher_dim, "out_b");
}

template <typename Scalar>
bool StudentModel<Scalar>::is_trainable(const std::string& name) const {
  return name != "token" || config_.mode != EmbeddingMode::IpaFrozen;
}

template <typename Scalar>
std::vector<std::pair<std::string, typename StudentModel<Scalar>::Matrix*>> StudentModel<Scalar>::trainable() {
  std::vector<std::pair<std::string, Matrix*>> out;
  for (auto& entry : params_.named())
    if (is_trainable(entry.first)) out.push_back(entry);
  return out;
}

template <typename Scalar>
TokenIds StudentModel<Scalar>::encode(const PronunciationSequence& seq, bool* truncated) const {
  if (seq.empty()) throw DataError("empty pronunciation sequence");
  const std::size_t n = std::min(seq.size(), static_cast<std::size_t>(config_.max_len));
  if (truncated) *truncated = seq.size() > n;
  TokenIds ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<int>(table_->require_token_id(seq[i]));
  return ids;
}

template <typename Scalar>
typename StudentModel<Scalar>::RowVector StudentModel<Scalar>::run(const TokenIds& ids, Cache* cache) const {
  const auto len = static_cast<Eigen::Index>(ids.size());
  if (len == 0) throw DataError("empty pronunciation sequence");
  if (len > config_.max_len) throw DataError("sequence longer than max_len");
  const Eigen::Index d = config_.d_model;
  const int heads = config_.heads;
  const Eigen::Index dh = d / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

  Matrix token_out(len, params_.token.cols());
  for (Eigen::Index i = 0; i < len; ++i) {
    const auto id = ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= vocab_size()) throw DataError("token id out of range");
    if (config_.mode == EmbeddingMode::Baseline)
      token_out.row(i) = params_.token.row(id);
    else
      token_out.row(i) = attribute_rows_.row(id) * params_.token;
  }
  Matrix h = params_.proj.size() > 0 ? Matrix(token_out * params_.proj) : token_out;
  h += params_.pos.topRows(len);

  if (cache) {
    cache->ids = ids;
    cache->token_out = token_out;
    cache->layers.resize(params_.layers.size());
  }
  for (std::size_t l = 0; l < params_.layers.size(); ++l) {
    const auto& p = params_.layers[l];
    LayerCache local;
    LayerCache& c = cache ? cache->layers[l] : local;
    c.h_in = h;
    c.q = add_row<Matrix>(h * p.wq, p.bq);
    c.k = h * p.wk;
    c.v = add_row<Matrix>(h * p.wv, p.bv);
    c.attn.resize(len, d);
    c.probs.resize(static_cast<std::size_t>(heads));
    for (int hd = 0; hd < heads; ++hd) {
      const auto cols = Eigen::seqN(hd * dh, dh);
      Matrix s = (c.q(Eigen::all, cols) * c.k(Eigen::all, cols).transpose()) * scale;
      softmax_rows(s);
      c.attn(Eigen::all, cols) = s * c.v(Eigen::all, cols);
      c.probs[static_cast<std::size_t>(hd)] = std::move(s);
    }
    const Matrix x1 = h + add_row<Matrix>(c.attn * p.wo, p.bo);
    c.h1 = layer_norm<Scalar>(x1, p.ln1_g, p.ln1_b, c.x1_hat, c.rstd1);
    c.f1 = add_row<Matrix>(c.h1 * p.w1, p.b1);
    c.g = c.f1.unaryExpr([](Scalar x) { return gelu(x); });
    const Matrix x2 = c.h1 + add_row<Matrix>(c.g * p.w2, p.b2);
    h = layer_norm<Scalar>(x2, p.ln2_g, p.ln2_b, c.x2_hat, c.rstd2);
  }
  const RowVector pooled = h.colwise().mean();
  if (cache) {
    cache->h_last = h;
    cache->pooled = pooled;
  }
  return pooled * params_.out_w + params_.out_b;
}

template <typename Scalar>
void StudentModel<Scalar>::backprop(const Cache& cache, const RowVector& dy, StudentParams<Scalar>& grads) const {
  const auto len = static_cast<Eigen::Index>(cache.ids.size());
  const Eigen::Index d = config_.d_model;
  const int heads = config_.heads;
  const Eigen::Index dh = d / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

  grads.out_w += cache.pooled.transpose() * dy;
  grads.out_b += dy;
  const RowVector dpooled = dy * params_.out_w.transpose();
  Matrix dh_mat = dpooled.replicate(len, 1) / static_cast<Scalar>(len);

  for (std::size_t l = params_.layers.size(); l-- > 0;) {
    const auto& p = params_.layers[l];
    const auto& c = cache.layers[l];
    auto& g = grads.layers[l];

    const Matrix dx2 = layer_norm_backward(dh_mat, p.ln2_g, c.x2_hat, c.rstd2, g.ln2_g, g.ln2_b);
    g.w2 += c.g.transpose() * dx2;
    g.b2 += dx2.colwise().sum();
    const Matrix dg = dx2 * p.w2.transpose();
    const Matrix df1 = dg.array() * c.f1.unaryExpr([](Scalar x) { return gelu_grad(x); }).array();
    g.w1 += c.h1.transpose() * df1;
    g.b1 += df1.colwise().sum();
    const Matrix dh1 = dx2 + df1 * p.w1.transpose();

    const Matrix dx1 = layer_norm_backward(dh1, p.ln1_g, c.x1_hat, c.rstd1, g.ln1_g, g.ln1_b);
    g.wo += c.attn.transpose() * dx1;
    g.bo += dx1.colwise().sum();
    const Matrix dattn = dx1 * p.wo.transpose();

    Matrix dq(len, d), dk(len, d), dv(len, d);
    for (int hd = 0; hd < heads; ++hd) {
      const auto cols = Eigen::seqN(hd * dh, dh);
      const Matrix& prob = c.probs[static_cast<std::size_t>(hd)];
      const Matrix da = dattn(Eigen::all, cols);
      const Matrix dprob = da * c.v(Eigen::all, cols).transpose();
      dv(Eigen::all, cols) = prob.transpose() * da;
      const auto row_dot = (dprob.array() * prob.array()).rowwise().sum();
      const Matrix ds = (prob.array() * (dprob.array().colwise() - row_dot)).matrix() * scale;
      dq(Eigen::all, cols) = ds * c.k(Eigen::all, cols);
      dk(Eigen::all, cols) = ds.transpose() * c.q(Eigen::all, cols);
    }
    g.wq += c.h_in.transpose() * dq;
    g.bq += dq.colwise().sum();
    g.wk += c.h_in.transpose() * dk;
    g.wv += c.h_in.transpose() * dv;
    g.bv += dv.colwise().sum();
    dh_mat = dx1 + dq * p.wq.transpose() + dk * p.wk.transpose() + dv * p.wv.transpose();
  }

  grads.pos.topRows(len) += dh_mat;
  Matrix dtoken = dh_mat;
  if (params_.proj.size() > 0) {
    grads.proj += cache.token_out.transpose() * dh_mat;
    dtoken = dh_mat * params_.proj.transpose();
  }
  for (Eigen::Index i = 0; i < len; ++i) {
    const auto id = cache.ids[static_cast<std::size_t>(i)];
    if (config_.mode == EmbeddingMode::Baseline)
      grads.token.row(id) += dtoken.row(i);
    else if (config_.mode == EmbeddingMode::IpaTrainable)
      grads.token += attribute_rows_.row(id).transpose() * dtoken.row(i);
  }
}

template <typename Scalar>
typename StudentModel<Scalar>::RowVector StudentModel<Scalar>::forward(const TokenIds& ids) const {
  return run(ids, nullptr);
}

template <typename Scalar>
typename StudentModel<Scalar>::Matrix StudentModel<Scalar>::forward(
    const std::vector<PronunciationSequence>& batch) const {
  Matrix out(static_cast<Eigen::Index>(batch.size()), config_.teacher_dim);
  for (std::size_t b = 0; b < batch.size(); ++b) out.row(static_cast<Eigen::Index>(b)) = run(encode(batch[b]), nullptr);
  return out;
}

template <typename Scalar>
Scalar StudentModel<Scalar>::loss_and_gradient(const std::vector<TokenIds>& batch, const Matrix& targets,
                                               StudentParams<Scalar>& grads) const {
  const auto n = static_cast<Eigen::Index>(batch.size());
  if (n == 0) throw DataError("empty batch");
  if (targets.rows() != n || targets.cols() != config_.teacher_dim)
    throw DataError("target shape does not match the batch");
  const Scalar denom = static_cast<Scalar>(n * config_.teacher_dim);
  Scalar loss = 0;
  Cache cache;
  for (Eigen::Index b = 0; b < n; ++b) {
    const RowVector y = run(batch[static_cast<std::size_t>(b)], &cache);
    const RowVector diff = y - targets.row(b);
    loss += diff.squaredNorm();
    backprop(cache, diff * (Scalar(2) / denom), grads);
  }
  return loss / denom;
}

template <typename Scalar>
Eigen::MatrixXd StudentModel<Scalar>::token_embeddings() const {
  if (config_.mode == EmbeddingMode::Baseline) return params_.token.template cast<double>();
  return attribute_rows_.template cast<double>() * params_.token.template cast<double>();
}

template struct StudentParams<float>;
template struct StudentParams<double>;
template class StudentModel<float>;
template class StudentModel<double>;

}  // namespace ipakit
