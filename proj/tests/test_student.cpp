#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ipakit/error.hpp"
#include "ipakit/lexicon.hpp"
#include "ipakit/phoneme_embedding.hpp"
#include "ipakit/student.hpp"
#include "support.hpp"

using namespace ipakit;

namespace {

const AttributeTable& table() { return default_attribute_table(); }

StudentConfig small_config(EmbeddingMode mode, int layers = 1) {
  StudentConfig c;
  c.mode = mode;
  c.d_model = 8;
  c.layers = layers;
  c.heads = 2;
  c.ffn_mult = 2;
  c.max_len = 12;
  c.teacher_dim = 5;
  c.seed = 3;
  return c;
}

PronunciationSequence seq(std::string_view ipa) { return parse_ipa(ipa, table()); }

// Plain-loop reference of the encoder, one sequence at a time.
using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Eigen::MatrixXd& m) {
  Mat out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  return out;
}

Mat matmul(const Mat& a, const Mat& b) {
  Mat out(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

void add_bias(Mat& a, const Mat& bias) {
  for (auto& row : a)
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += bias[0][j];
}

Mat layer_norm(const Mat& x, const Mat& g, const Mat& b) {
  Mat out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double mean = 0, var = 0;
    for (double v : x[i]) mean += v;
    mean /= static_cast<double>(x[i].size());
    for (double v : x[i]) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x[i].size());
    for (std::size_t j = 0; j < x[i].size(); ++j)
      out[i][j] = (x[i][j] - mean) / std::sqrt(var + 1e-12) * g[0][j] + b[0][j];
  }
  return out;
}

std::vector<double> reference_forward(const StudentModel<double>& model, const PronunciationSequence& s) {
  const auto& p = model.params();
  const auto& cfg = model.config();
  const std::size_t len = std::min<std::size_t>(s.size(), static_cast<std::size_t>(cfg.max_len));
  Mat h;
  for (std::size_t i = 0; i < len; ++i) {
    Eigen::RowVectorXd e;
    if (cfg.mode == EmbeddingMode::Baseline)
      e = p.token.row(static_cast<Eigen::Index>(table().require_token_id(s[i])));
    else
      e = attribute_vector(s[i], table()).transpose() * p.token;
    if (p.proj.size() > 0) e = e * p.proj;
    e += p.pos.row(static_cast<Eigen::Index>(i));
    h.push_back(std::vector<double>(e.data(), e.data() + e.size()));
  }
  const std::size_t d = static_cast<std::size_t>(cfg.d_model), dh = d / static_cast<std::size_t>(cfg.heads);
  for (const auto& lp : p.layers) {
    Mat q = matmul(h, to_mat(lp.wq)), k = matmul(h, to_mat(lp.wk)), v = matmul(h, to_mat(lp.wv));
    add_bias(q, to_mat(lp.bq));
    add_bias(v, to_mat(lp.bv));
    Mat attn(len, std::vector<double>(d, 0.0));
    for (std::size_t hd = 0; hd < static_cast<std::size_t>(cfg.heads); ++hd) {
      for (std::size_t i = 0; i < len; ++i) {
        std::vector<double> w(len);
        double mx = -1e300, total = 0;
        for (std::size_t j = 0; j < len; ++j) {
          double dot = 0;
          for (std::size_t c = hd * dh; c < (hd + 1) * dh; ++c) dot += q[i][c] * k[j][c];
          w[j] = dot / std::sqrt(static_cast<double>(dh));
          mx = std::max(mx, w[j]);
        }
        for (auto& x : w) total += (x = std::exp(x - mx));
        for (std::size_t j = 0; j < len; ++j)
          for (std::size_t c = hd * dh; c < (hd + 1) * dh; ++c) attn[i][c] += w[j] / total * v[j][c];
      }
    }
    Mat o = matmul(attn, to_mat(lp.wo));
    add_bias(o, to_mat(lp.bo));
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t c = 0; c < d; ++c) o[i][c] += h[i][c];
    const Mat h1 = layer_norm(o, to_mat(lp.ln1_g), to_mat(lp.ln1_b));
    Mat f = matmul(h1, to_mat(lp.w1));
    add_bias(f, to_mat(lp.b1));
    for (auto& row : f)
      for (auto& x : row) x = 0.5 * x * (1 + std::erf(x / std::numbers::sqrt2));
    Mat f2 = matmul(f, to_mat(lp.w2));
    add_bias(f2, to_mat(lp.b2));
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t c = 0; c < d; ++c) f2[i][c] += h1[i][c];
    h = layer_norm(f2, to_mat(lp.ln2_g), to_mat(lp.ln2_b));
  }
  Mat pooled(1, std::vector<double>(d, 0.0));
  for (const auto& row : h)
    for (std::size_t c = 0; c < d; ++c) pooled[0][c] += row[c] / static_cast<double>(len);
  Mat out = matmul(pooled, to_mat(p.out_w));
  add_bias(out, to_mat(p.out_b));
  return out[0];
}

// Non-trivial biases and gains so the reference exercises every tensor.
void perturb(StudentModel<double>& model, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.3);
  for (auto& [name, m] : model.params().named())
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] += normal(rng);
}

}  // namespace

TEST_CASE("mode names") {
  for (auto m : {EmbeddingMode::IpaFrozen, EmbeddingMode::IpaTrainable, EmbeddingMode::Baseline})
    CHECK(parse_embedding_mode(to_string(m)) == m);
  CHECK_THROWS_AS(parse_embedding_mode("ipa"), DataError);
}

TEST_CASE("config validation") {
  auto c = small_config(EmbeddingMode::IpaFrozen);
  CHECK_NOTHROW(c.validate());
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), DataError);
  c = small_config(EmbeddingMode::IpaFrozen);
  c.teacher_dim = 0;
  CHECK_THROWS_AS(StudentModel<float>(c, table()), DataError);
  c = small_config(EmbeddingMode::IpaFrozen);
  c.learning_rate = std::nan("");
  CHECK_THROWS_AS(c.validate(), DataError);
  c = small_config(EmbeddingMode::IpaFrozen);
  c.max_len = 1;
  CHECK_THROWS_AS(c.validate(), DataError);
}

TEST_CASE("parameter shapes and initialization") {
  const auto n = AttributeIndex(table()).size();
  const auto v = static_cast<Eigen::Index>(table().size());
  StudentModel<float> ipa(small_config(EmbeddingMode::IpaFrozen), table());
  CHECK(ipa.params().token.rows() == n);
  CHECK(ipa.params().token.cols() == n);
  CHECK(ipa.params().proj.rows() == n);
  CHECK(ipa.params().proj.cols() == 8);
  CHECK_FALSE(ipa.is_trainable("token"));
  CHECK(ipa.is_trainable("proj"));
  for (const auto& [name, m] : ipa.trainable()) CHECK(name != "token");

  StudentModel<float> base(small_config(EmbeddingMode::Baseline), table());
  CHECK(base.params().token.rows() == v);
  CHECK(base.params().token.cols() == 8);
  CHECK(base.params().proj.size() == 0);
  CHECK(base.is_trainable("token"));

  auto square = small_config(EmbeddingMode::IpaTrainable);
  square.d_model = static_cast<int>(n);
  square.heads = 4;
  StudentModel<float> direct(square, table());
  CHECK(direct.params().proj.size() == 0);

  auto big = small_config(EmbeddingMode::IpaFrozen);
  big.d_model = 64;
  big.heads = 4;
  StudentModel<double> model(big, table());
  const auto& w = model.params().layers[0].w1;
  const double mean = w.mean();
  const double sd = std::sqrt((w.array() - mean).square().sum() / static_cast<double>(w.size()));
  CHECK(std::abs(mean) < 0.002);
  CHECK(sd == doctest::Approx(0.02).epsilon(0.05));
  CHECK(model.params().layers[0].bq.isZero());
  CHECK(model.params().layers[0].ln2_g.isOnes());
  CHECK(model.params().out_b.isZero());

  StudentModel<double> same(big, table());
  CHECK(same.params().pos == model.params().pos);
}

TEST_CASE("zero-layer model is a pooled projection") {
  const auto cfg = small_config(EmbeddingMode::IpaTrainable, 0);
  StudentModel<double> model(cfg, table());
  perturb(model, 1);
  const auto s = seq("kæt");
  const auto& p = model.params();
  Eigen::RowVectorXd pooled = Eigen::RowVectorXd::Zero(8);
  for (std::size_t i = 0; i < 3; ++i)
    pooled += (attribute_vector(s[i], table()).transpose() * p.token * p.proj +
               p.pos.row(static_cast<Eigen::Index>(i))) / 3.0;
  const Eigen::RowVectorXd expected = pooled * p.out_w + p.out_b;
  const auto got = model.forward(model.encode(s));
  CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("forward matches a plain-loop reference") {
  for (auto mode : {EmbeddingMode::IpaFrozen, EmbeddingMode::IpaTrainable, EmbeddingMode::Baseline}) {
    CAPTURE(to_string(mode));
    StudentModel<double> model(small_config(mode, 2), table());
    perturb(model, 7);
    for (const char* ipa : {"kæt", "ðə dɔɡ, ɹæn", "ʧ", "əˈfoʊtoʊ"}) {
      CAPTURE(ipa);
      const auto s = seq(ipa);
      const auto got = model.forward(model.encode(s));
      const auto want = reference_forward(model, s);
      for (std::size_t j = 0; j < want.size(); ++j) CHECK(got(static_cast<Eigen::Index>(j)) == doctest::Approx(want[j]).epsilon(1e-10));
    }
  }
}

TEST_CASE("outputs do not depend on batch composition") {
  StudentModel<float> model(small_config(EmbeddingMode::IpaTrainable, 2), table());
  const std::vector<PronunciationSequence> batch{seq("kæt"),   seq("ðə lɑŋɡɚ wɝd ɪz hɪɹ"), seq("s"),
                                                 seq("dɔɡ ænd kæt"), seq("ə ˈfoʊˌtoʊ əv ə dɛsk."), seq("ʤ"),
                                                 seq("ˈɛvri deɪ"), seq("ʃu, veɪs")};
  const auto together = model.forward(batch);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto alone = model.forward(std::vector{batch[b]});
    CHECK((together.row(static_cast<Eigen::Index>(b)) - alone.row(0)).cwiseAbs().maxCoeff() < 1e-5f);
  }
  std::vector<PronunciationSequence> reversed(batch.rbegin(), batch.rend());
  const auto rev = model.forward(reversed);
  for (std::size_t b = 0; b < batch.size(); ++b)
    CHECK((together.row(static_cast<Eigen::Index>(b)) - rev.row(static_cast<Eigen::Index>(batch.size() - 1 - b)))
              .cwiseAbs()
              .maxCoeff() < 1e-5f);
}

TEST_CASE("encoding and truncation") {
  StudentModel<float> model(small_config(EmbeddingMode::IpaFrozen), table());
  bool truncated = true;
  CHECK(model.encode(seq("kæt"), &truncated) == TokenIds{static_cast<int>(table().require_token_id("k")),
                                                         static_cast<int>(table().require_token_id("æ")),
                                                         static_cast<int>(table().require_token_id("t"))});
  CHECK_FALSE(truncated);

  const auto long_seq = seq("ðə kæt sæt ɑn ðə mæt");
  REQUIRE(long_seq.size() > 12);
  const auto ids = model.encode(long_seq, &truncated);
  CHECK(truncated);
  CHECK(ids.size() == 12);
  PronunciationSequence head;
  head.tokens.assign(long_seq.tokens.begin(), long_seq.tokens.begin() + 12);
  CHECK(model.forward(ids) == model.forward(model.encode(head)));

  CHECK_THROWS_AS(model.encode(PronunciationSequence{}), DataError);
  CHECK_THROWS_AS(model.encode(PronunciationSequence{{"q"}}), DataError);
  CHECK_THROWS_AS(model.forward(TokenIds{}), DataError);
}

TEST_CASE("spacing and stress keep near-homophones apart") {
  const auto dict = test::toy_dictionary();
  const auto a = std::get<PronunciationSequence>(convert_sentence("every day", dict, table()));
  const auto b = std::get<PronunciationSequence>(convert_sentence("everyday", dict, table()));
  CHECK(a != b);
  StudentModel<float> model(small_config(EmbeddingMode::IpaTrainable, 2), table());
  CHECK(model.forward(std::vector{a}) == model.forward(std::vector{a}));
}

TEST_CASE("precision cast round trip") {
  StudentModel<float> model(small_config(EmbeddingMode::IpaFrozen, 2), table());
  const auto back = model.cast<double>().cast<float>();
  const auto a = model.params().named();
  const auto b = back.params().named();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(*a[i].second == *b[i].second);
  }
  auto params = model.params();
  params.out_w.resize(3, 3);
  CHECK_THROWS_AS(StudentModel<float>(model.config(), table(), params), DataError);
}

TEST_CASE("token embeddings") {
  StudentModel<double> ipa(small_config(EmbeddingMode::IpaFrozen), table());
  const auto e = ipa.token_embeddings();
  CHECK(e.rows() == static_cast<Eigen::Index>(table().size()));
  const auto id = static_cast<Eigen::Index>(table().require_token_id("b"));
  CHECK((e.row(id) - attribute_vector("b", table()).transpose() * ipa.params().token).cwiseAbs().maxCoeff() < 1e-15);
  StudentModel<double> base(small_config(EmbeddingMode::Baseline), table());
  CHECK(base.token_embeddings() == base.params().token);
}
