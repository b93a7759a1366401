#include <doctest.h>

#include <cmath>

#include "ipakit/error.hpp"
#include "ipakit/phoneme_embedding.hpp"

using namespace ipakit;
using Index = AttributeIndex;

namespace {

const AttributeTable& table() { return default_attribute_table(); }

}  // namespace

TEST_CASE("attribute index layout") {
  const Index index(table());
  CHECK(index.size() == 44);
  CHECK(Index::kFirstPlace == 10);
  CHECK(Index::kVowelFlag == 21);
  CHECK(Index::kFirstOther == 25);
  CHECK(index.label(Index::manner(Manner::Plosive)) == "Manner:Plosive");
  CHECK(index.label(Index::place(Place::Labiodental)) == "Place:Labiodental");
  CHECK(index.label(Index::kHeight) == "Height");
  CHECK(index.label(Index::other(0)) == "PrimaryStress");
  CHECK(index.label(Index::other(2)) == "Char:Space");
}

TEST_CASE("magnitude vectors") {
  const auto v = attribute_vector("v", table());
  CHECK(v.size() == 44);
  CHECK(v(Index::kConsonantFlag) == 1.0);
  CHECK(v(Index::kVoicing) == 1.0);
  CHECK(v(Index::manner(Manner::Fricative)) == 1.0);
  CHECK(v(Index::place(Place::Labiodental)) == 1.0);
  CHECK(v.sum() == 4.0);

  const auto w = attribute_vector("w", table());
  CHECK(w(Index::place(Place::Bilabial)) == 1.0);
  CHECK(w(Index::place(Place::Velar)) == 1.0);
  CHECK(w.sum() == 5.0);

  const auto a = attribute_vector("a", table());
  CHECK(a(Index::kVowelFlag) == 1.0);
  CHECK(a(Index::kHeight) == 1.0);
  CHECK(a(Index::kBackness) == 0.0);
  CHECK(a(Index::kRoundedness) == 0.0);

  const auto space = attribute_vector(" ", table());
  CHECK(space(Index::other(2)) == 1.0);
  CHECK(space.sum() == 1.0);
  CHECK_THROWS_AS(attribute_vector("q", table()), DataError);
}

TEST_CASE("every token has at most six nonzero attributes and distinct tokens differ") {
  const auto x = attribute_matrix(table());
  CHECK(x.rows() == static_cast<Eigen::Index>(table().size()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    CHECK((x.row(r).array() != 0.0).count() <= 6);
    CHECK(x.row(r).minCoeff() >= 0.0);
    CHECK(x.row(r).maxCoeff() <= 1.0);
    for (Eigen::Index s = r + 1; s < x.rows(); ++s) CHECK(x.row(r) != x.row(s));
  }
}

TEST_CASE("embedding is x^T W") {
  const auto w = FeatureMatrix<double>::random(44, 44, FeatureMode::Frozen, 5);
  const Eigen::RowVectorXd u = embed_token("ʊ", w, table());
  const Eigen::RowVectorXd oracle = w.weights.row(Index::kVowelFlag) + w.weights.row(Index::kHeight) / 6.0 +
                                    w.weights.row(Index::kBackness) * 0.75 + w.weights.row(Index::kRoundedness);
  CHECK((u - oracle).norm() < 1e-15);
  CHECK((embed_token(",", w, table()) - w.weights.row(Index::other(4))).norm() == 0.0);

  const auto seq = parse_ipa("kæt", table());
  const auto e = embed_sequence(seq, w, table());
  CHECK(e.rows() == 3);
  CHECK((e.row(1) - embed_token("æ", w, table())).norm() == 0.0);
}

TEST_CASE("feature matrix initialisation") {
  const auto a = FeatureMatrix<double>::random(44, 300, FeatureMode::Trainable, 42);
  const auto b = FeatureMatrix<double>::random(44, 300, FeatureMode::Trainable, 42);
  const auto c = FeatureMatrix<double>::random(44, 300, FeatureMode::Trainable, 43);
  CHECK(a.weights == b.weights);
  CHECK(a.weights != c.weights);
  const double mean = a.weights.mean();
  const double sd = std::sqrt((a.weights.array() - mean).square().mean());
  CHECK(std::abs(mean) < 1e-3);
  CHECK(sd == doctest::Approx(kInitStddev).epsilon(0.03));
  CHECK_THROWS_AS(embed_token("p", FeatureMatrix<double>::random(10, 4, FeatureMode::Frozen, 0), table()), DataError);
}

TEST_CASE("baseline lookup") {
  const auto layer = BaselineTable<float>::random(static_cast<Eigen::Index>(table().size()), 8, 3);
  const auto e = embed_sequence(parse_ipa("ə kæt", table()), layer, table());
  CHECK(e.rows() == 5);
  CHECK(e.row(1) == layer.weights.row(static_cast<Eigen::Index>(table().require_token_id(" "))));
}
