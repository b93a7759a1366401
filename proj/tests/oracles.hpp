#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ipakit/space_metrics.hpp"

// Brute-force reference implementations of the phoneme-space metrics.
namespace ipakit::test {

inline const std::vector<std::string> kChartVowels{"i", "ɪ", "e", "ɛ", "æ", "ə", "ɑ", "ɔ", "o", "ʊ", "u", "a"};

// Random phoneme subset (>= 3 consonants, >= 3 vowels) with random points;
// coarse coordinates make distance ties likely.
inline PhonemeSpace random_space(std::mt19937_64& rng, bool coarse) {
  std::vector<std::string> cons, vows;
  for (const auto& p : default_attribute_table().phonemes()) (p.is_consonant() ? cons : vows).push_back(p.symbol);
  std::shuffle(cons.begin(), cons.end(), rng);
  std::shuffle(vows.begin(), vows.end(), rng);
  const auto nc = std::uniform_int_distribution<std::size_t>(3, cons.size())(rng);
  const auto nv = std::uniform_int_distribution<std::size_t>(3, vows.size())(rng);
  std::vector<std::string> syms(cons.begin(), cons.begin() + static_cast<std::ptrdiff_t>(nc));
  syms.insert(syms.end(), vows.begin(), vows.begin() + static_cast<std::ptrdiff_t>(nv));
  std::shuffle(syms.begin(), syms.end(), rng);
  const auto dim = std::uniform_int_distribution<Eigen::Index>(1, 6)(rng);
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(syms.size()), dim);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> grid(-2, 2);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts(i) = coarse ? grid(rng) : normal(rng);
  return PhonemeSpace(default_attribute_table(), syms, pts);
}

inline double oracle_silhouette(const PhonemeSpace& s, bool consonants) {
  double total = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.phoneme(i).is_consonant() != consonants) continue;
    double a = 0.0, b = 0.0;
    int na = 0, nb = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      double d = 0.0;
      for (Eigen::Index k = 0; k < s.points().cols(); ++k) d += std::pow(s.points()(i, k) - s.points()(j, k), 2);
      d = std::sqrt(d);
      if (s.phoneme(j).is_consonant() == consonants) {
        if (j != i) a += d, ++na;
      } else {
        b += d, ++nb;
      }
    }
    a /= na;
    b /= nb;
    total += std::max(a, b) == 0.0 ? 0.0 : (b - a) / std::max(a, b);
    ++n;
  }
  return total / n;
}

inline bool oracle_shares(const Phoneme& a, const Phoneme& b, ConsonantAttribute attr) {
  switch (attr) {
    case ConsonantAttribute::Voicing: return a.voiced == b.voiced;
    case ConsonantAttribute::Place:
      for (std::size_t p = 0; p < kPlaceCount; ++p)
        if (a.places[p] && b.places[p]) return true;
      return false;
    case ConsonantAttribute::Manner:
      for (std::size_t m = 0; m < kMannerCount; ++m)
        if (a.manners[m] && b.manners[m]) return true;
      return false;
  }
  return false;
}

// Selection-order ranking and the literal Precision@k * (Recall@k - Recall@(k-1)) sum.
inline double oracle_ap(const PhonemeSpace& s, std::size_t q, ConsonantAttribute attr) {
  std::vector<std::size_t> left;
  for (std::size_t j = 0; j < s.size(); ++j)
    if (j != q && s.phoneme(j).is_consonant()) left.push_back(j);
  std::vector<std::size_t> ranking;
  while (!left.empty()) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < left.size(); ++c)
      if (s.distance(q, left[c]) < s.distance(q, left[best])) best = c;
    ranking.push_back(left[best]);
    left.erase(left.begin() + static_cast<std::ptrdiff_t>(best));
  }
  double relevant = 0.0;
  for (std::size_t j : ranking) relevant += oracle_shares(s.phoneme(q), s.phoneme(j), attr);
  if (relevant == 0.0) return -1.0;
  double ap = 0.0, hits = 0.0, prev_recall = 0.0;
  for (std::size_t k = 1; k <= ranking.size(); ++k) {
    hits += oracle_shares(s.phoneme(q), s.phoneme(ranking[k - 1]), attr);
    const double recall = hits / relevant;
    ap += hits / static_cast<double>(k) * (recall - prev_recall);
    prev_recall = recall;
  }
  return ap;
}

inline double oracle_map(const PhonemeSpace& s, ConsonantAttribute attr) {
  double sum = 0.0;
  int n = 0;
  for (std::size_t q = 0; q < s.size(); ++q) {
    if (!s.phoneme(q).is_consonant()) continue;
    const double ap = oracle_ap(s, q, attr);
    if (ap < 0) continue;
    sum += ap;
    ++n;
  }
  return sum / n;
}

// rank = 1 + #smaller + (#equal - 1) / 2, then the Pearson sum formula.
inline double oracle_spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (double w : v) less += w < v[i], equal += w == v[i];
      r[i] = 1 + less + (equal - 1) / 2;
    }
    return r;
  };
  const auto x = ranks(a), y = ranks(b);
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i], sy += y[i], sxy += x[i] * y[i], sxx += x[i] * x[i], syy += y[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

// Largest variance of the centred 2-D points along any direction: scan the
// half circle, then golden-section refine around the best angle.
inline double exhaustive_top_variance(const Eigen::MatrixXd& centred) {
  const auto n = static_cast<double>(centred.rows());
  auto variance = [&](double theta) {
    const Eigen::Vector2d u(std::cos(theta), std::sin(theta));
    return (centred * u).squaredNorm() / (n - 1);
  };
  const int steps = 3600;
  int best = 0;
  for (int s = 1; s < steps; ++s)
    if (variance(std::numbers::pi * s / steps) > variance(std::numbers::pi * best / steps)) best = s;
  double lo = std::numbers::pi * (best - 1) / steps, hi = std::numbers::pi * (best + 1) / steps;
  const double g = (std::sqrt(5.0) - 1) / 2;
  for (int it = 0; it < 200; ++it) {
    const double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    if (variance(x1) < variance(x2))
      lo = x1;
    else
      hi = x2;
  }
  return variance((lo + hi) / 2);
}

}  // namespace ipakit::test
