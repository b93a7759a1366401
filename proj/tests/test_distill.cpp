#include <doctest.h>

#include <cmath>
#include <random>

#include "ipakit/distill.hpp"
#include "ipakit/error.hpp"
#include "ipakit/phoneme_embedding.hpp"
#include "support.hpp"

using namespace ipakit;

namespace {

const AttributeTable& table() { return default_attribute_table(); }

StudentConfig tiny_config(EmbeddingMode mode, int layers, int teacher_dim = 6) {
  StudentConfig c;
  c.mode = mode;
  c.d_model = 8;
  c.layers = layers;
  c.heads = 2;
  c.ffn_mult = 2;
  c.max_len = 16;
  c.teacher_dim = teacher_dim;
  c.seed = 11;
  c.learning_rate = 1e-2;
  c.batch_size = 4;
  c.epochs = 3;
  return c;
}

std::vector<CorpusPair> toy_pairs() {
  const auto sentences = test::data_lines("sentences.txt");
  return build_corpus(sentences, test::toy_dictionary(), table()).pairs;
}

TeacherTable teacher_for(const std::vector<CorpusPair>& pairs, std::uint32_t dim) {
  std::vector<std::string> texts;
  for (const auto& p : pairs) texts.push_back(p.text);
  return synthetic_teacher(texts, dim, 9);
}

std::size_t parameter_count(const StudentParams<double>& p) {
  std::size_t n = 0;
  for (const auto& [name, m] : p.named()) n += static_cast<std::size_t>(m->size());
  return n;
}

std::pair<std::vector<TokenIds>, Eigen::MatrixXd> check_batch(const StudentModel<double>& model) {
  std::vector<TokenIds> ids;
  for (const char* ipa : {"kæt", "ðə dɔɡ ɹæn.", "ˈwɔtɚ"}) ids.push_back(model.encode(parse_ipa(ipa, table())));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 0.5);
  Eigen::MatrixXd targets(3, model.config().teacher_dim);
  for (Eigen::Index i = 0; i < targets.size(); ++i) targets(i) = normal(rng);
  return {ids, targets};
}

void perturb(StudentModel<double>& model, double sd) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, sd);
  for (auto& [name, m] : model.params().named())
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] += normal(rng);
}

bool same_params(const StudentParams<float>& a, const StudentParams<float>& b) {
  const auto x = a.named();
  const auto y = b.named();
  for (std::size_t i = 0; i < x.size(); ++i)
    if (*x[i].second != *y[i].second) return false;
  return true;
}

}  // namespace

TEST_CASE("mse loss") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(4, 7);
  CHECK(mse_loss(a, a) == 0.0);
  CHECK(mse_loss(a.array() + 1.0, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(mse_loss(a, Eigen::MatrixXd::Zero(4, 6)), DataError);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd p(5, 9), t(5, 9);
    double oracle = 0;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 9; ++j) {
        p(i, j) = u(rng);
        t(i, j) = u(rng);
        oracle += (p(i, j) - t(i, j)) * (p(i, j) - t(i, j));
      }
    CHECK(std::abs(mse_loss(p, t) - oracle / 45.0) < 1e-9);
  }
}

TEST_CASE("adam against a scalar oracle") {
  Eigen::MatrixXd x(1, 2);
  x << 1.0, -2.0;
  Adam<double> adam({{"x", &x}}, 0.1);
  double m[2] = {0, 0}, v[2] = {0, 0}, ref[2] = {1.0, -2.0};
  for (int t = 1; t <= 5; ++t) {
    Eigen::MatrixXd g(1, 2);
    g << 2 * x(0, 0), std::sin(x(0, 1));
    for (int i = 0; i < 2; ++i) {
      const double gi = i == 0 ? 2 * ref[0] : std::sin(ref[1]);
      m[i] = 0.9 * m[i] + 0.1 * gi;
      v[i] = 0.999 * v[i] + 0.001 * gi * gi;
      ref[i] -= 0.1 * (m[i] / (1 - std::pow(0.9, t))) / (std::sqrt(v[i] / (1 - std::pow(0.999, t))) + 1e-8);
    }
    adam.step({{"x", &g}});
    CHECK(x(0, 0) == doctest::Approx(ref[0]).epsilon(1e-14));
    CHECK(x(0, 1) == doctest::Approx(ref[1]).epsilon(1e-14));
  }
  CHECK(adam.steps() == 5);
  Eigen::MatrixXd before = x;
  adam.step({});
  CHECK(x == before);
}

TEST_CASE("gradient of the linear-only model") {
  for (auto mode : {EmbeddingMode::IpaTrainable, EmbeddingMode::Baseline}) {
    CAPTURE(to_string(mode));
    StudentModel<double> model(tiny_config(mode, 0), table());
    perturb(model, 0.3);
    const auto [ids, targets] = check_batch(model);
    const auto r = grad_check(model, ids, targets);
    CAPTURE(r.worst_tensor);
    CHECK(r.max_relative_error < 1e-7);
  }
}

TEST_CASE("gradient of the 1-layer model") {
  for (auto mode : {EmbeddingMode::IpaFrozen, EmbeddingMode::IpaTrainable, EmbeddingMode::Baseline}) {
    CAPTURE(to_string(mode));
    StudentModel<double> model(tiny_config(mode, 1), table());
    CHECK(parameter_count(model.params()) <= 10000);
    perturb(model, 0.2);
    const auto [ids, targets] = check_batch(model);
    const auto r = grad_check(model, ids, targets);
    CAPTURE(r.worst_tensor);
    CAPTURE(r.worst_index);
    CHECK(r.max_relative_error < 1e-4);
    CHECK(r.checked > 0);
    if (mode == EmbeddingMode::IpaFrozen) CHECK(r.checked == parameter_count(model.params()) - 44 * 44);
  }
}

TEST_CASE("untouched attribute rows get zero gradient") {
  StudentModel<double> model(tiny_config(EmbeddingMode::IpaTrainable, 1), table());
  const auto [ids, targets] = check_batch(model);
  auto grads = model.params().zeros_like();
  model.loss_and_gradient(ids, targets, grads);
  const Eigen::MatrixXd x = attribute_matrix(table());
  Eigen::RowVectorXd used = Eigen::RowVectorXd::Zero(x.cols());
  for (const auto& seq : ids)
    for (int id : seq) used += x.row(id).cwiseAbs();
  int untouched = 0;
  for (Eigen::Index r = 0; r < x.cols(); ++r) {
    if (used(r) != 0) {
      CHECK_FALSE(grads.token.row(r).isZero());
      continue;
    }
    ++untouched;
    CHECK(grads.token.row(r).isZero(0.0));
  }
  CHECK(untouched > 10);
}

TEST_CASE("zero learning rate and frozen features") {
  const auto pairs = toy_pairs();
  const auto teacher = teacher_for(pairs, 6);

  auto c = tiny_config(EmbeddingMode::IpaTrainable, 1);
  c.learning_rate = 0.0;
  StudentModel<float> still(c, table());
  const auto before = still.params();
  train(still, pairs, teacher);
  CHECK(same_params(before, still.params()));

  StudentModel<float> frozen(tiny_config(EmbeddingMode::IpaFrozen, 1), table());
  const auto w = frozen.params().token;
  const auto pos = frozen.params().pos;
  const auto teacher_copy = teacher;
  const auto log = train(frozen, pairs, teacher);
  CHECK(log.steps == 3 * ((pairs.size() + 3) / 4));
  CHECK(frozen.params().token == w);
  CHECK(frozen.params().pos != pos);
  CHECK(teacher == teacher_copy);
}

TEST_CASE("training is deterministic and logs every epoch") {
  auto pairs = toy_pairs();
  const auto teacher = teacher_for(pairs, 6);
  const std::vector<CorpusPair> val(pairs.end() - 3, pairs.end());
  pairs.resize(pairs.size() - 3);

  auto run = [&] {
    StudentModel<float> model(tiny_config(EmbeddingMode::IpaTrainable, 2), table());
    std::vector<int> seen;
    auto log = train(model, pairs, teacher, val, [&](const EpochLog& e) { seen.push_back(e.epoch); });
    CHECK(seen == std::vector<int>{1, 2, 3});
    return std::pair{log, model.params()};
  };
  const auto [log_a, params_a] = run();
  const auto [log_b, params_b] = run();
  REQUIRE(log_a.epochs.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(log_a.epochs[e].train_mse == log_b.epochs[e].train_mse);
    REQUIRE(log_a.epochs[e].val_mse);
    CHECK(*log_a.epochs[e].val_mse == *log_b.epochs[e].val_mse);
  }
  CHECK(same_params(params_a, params_b));

  auto other = tiny_config(EmbeddingMode::IpaTrainable, 2);
  other.seed = 12;
  StudentModel<float> model(other, table());
  const auto log_c = train(model, pairs, teacher);
  CHECK(log_c.epochs[0].train_mse != log_a.epochs[0].train_mse);
}

TEST_CASE("training errors") {
  const auto pairs = toy_pairs();
  auto teacher = teacher_for(std::vector<CorpusPair>(pairs.begin() + 1, pairs.end()), 6);
  StudentModel<float> model(tiny_config(EmbeddingMode::IpaFrozen, 1), table());
  CHECK_THROWS_WITH_AS(train(model, pairs, teacher), doctest::Contains("no teacher vector"), DataError);
  CHECK_THROWS_AS(train(model, {}, teacher), DataError);
  CHECK_THROWS_AS(train(model, pairs, teacher_for(pairs, 7)), DataError);

  const auto full = teacher_for(pairs, 6);
  model.params().out_b(0, 0) = std::nanf("");
  CHECK_THROWS_WITH_AS(train(model, pairs, full), doctest::Contains("non-finite"), DataError);
}

TEST_CASE("truncated sequences are counted") {
  auto c = tiny_config(EmbeddingMode::IpaFrozen, 1);
  c.max_len = 5;
  c.epochs = 1;
  const auto pairs = toy_pairs();
  StudentModel<float> model(c, table());
  std::size_t longer = 0;
  for (const auto& p : pairs) longer += p.pronunciation.size() > 5;
  CHECK(train(model, pairs, teacher_for(pairs, 6)).truncated == longer);
  CHECK(longer > 0);
}

TEST_CASE("evaluate_mse is the mse of forward outputs") {
  const auto pairs = toy_pairs();
  const auto teacher = teacher_for(pairs, 6);
  StudentModel<float> model(tiny_config(EmbeddingMode::Baseline, 1), table());
  std::vector<PronunciationSequence> seqs;
  for (const auto& p : pairs) seqs.push_back(p.pronunciation);
  const Eigen::MatrixXd out = model.forward(seqs).cast<double>();
  CHECK(evaluate_mse(model, pairs, teacher) ==
        doctest::Approx(mse_loss(out, teacher_targets(pairs, teacher).cast<double>())).epsilon(1e-12));
}
