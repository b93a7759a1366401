#include "ipakit/space_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "ipakit/error.hpp"

namespace ipakit {

// ---------------------------------------------------------------------------
// PhonemeSpace

PhonemeSpace::PhonemeSpace(const AttributeTable& table, const Eigen::MatrixXd& embeddings,
                           const std::vector<std::string>& symbols)
    : table_(&table) {
  if (static_cast<std::size_t>(embeddings.rows()) != table.size())
    throw DataError("embedding matrix has " + std::to_string(embeddings.rows()) + " rows, table has " +
                    std::to_string(table.size()) + " tokens");
  for (const auto& s : symbols)
    if (!table.phoneme(s)) throw DataError("'" + s + "' is not a phoneme of the table");
  std::vector<Eigen::Index> rows;
  for (std::size_t id = 0; id < table.phonemes().size(); ++id) {
    const auto& sym = table.phonemes()[id].symbol;
    if (symbols.empty() || std::find(symbols.begin(), symbols.end(), sym) != symbols.end()) {
      symbols_.push_back(sym);
      rows.push_back(static_cast<Eigen::Index>(id));
    }
  }
  points_.resize(static_cast<Eigen::Index>(rows.size()), embeddings.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) points_.row(static_cast<Eigen::Index>(i)) = embeddings.row(rows[i]);
}

PhonemeSpace::PhonemeSpace(const AttributeTable& table, std::vector<std::string> symbols, Eigen::MatrixXd points)
    : table_(&table) {
  if (static_cast<std::size_t>(points.rows()) != symbols.size())
    throw DataError("point count does not match symbol count");
  std::vector<std::size_t> order(symbols.size());
  std::iota(order.begin(), order.end(), 0);
  for (const auto& s : symbols)
    if (!table.phoneme(s)) throw DataError("'" + s + "' is not a phoneme of the table");
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return *table.token_id(symbols[a]) < *table.token_id(symbols[b]);
  });
  points_.resize(points.rows(), points.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i > 0 && symbols[order[i]] == symbols[order[i - 1]])
      throw DataError("duplicate symbol '" + symbols[order[i]] + "' in phoneme space");
    symbols_.push_back(symbols[order[i]]);
    points_.row(static_cast<Eigen::Index>(i)) = points.row(static_cast<Eigen::Index>(order[i]));
  }
}

std::vector<std::size_t> PhonemeSpace::consonants() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (phoneme(i).is_consonant()) out.push_back(i);
  return out;
}

std::vector<std::size_t> PhonemeSpace::vowels() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (phoneme(i).is_vowel()) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------------------
// Silhouette

namespace {

double cluster_silhouette(const PhonemeSpace& space, const std::vector<std::size_t>& own,
                          const std::vector<std::size_t>& other) {
  double total = 0.0;
  for (std::size_t i : own) {
    double a = 0.0, b = 0.0;
    for (std::size_t j : own)
      if (j != i) a += space.distance(i, j);
    for (std::size_t j : other) b += space.distance(i, j);
    a /= static_cast<double>(own.size() - 1);
    b /= static_cast<double>(other.size());
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(own.size());
}

}  // namespace

SilhouetteScores silhouette(const PhonemeSpace& space) {
  const auto c = space.consonants();
  const auto v = space.vowels();
  if (c.size() < 2 || v.size() < 2) throw DataError("silhouette needs at least 2 consonants and 2 vowels");
  return {cluster_silhouette(space, c, v), cluster_silhouette(space, v, c)};
}

// ---------------------------------------------------------------------------
// Consonant mAP

double average_precision(const std::vector<bool>& relevant, std::size_t relevant_total) {
  if (relevant_total == 0) throw DataError("average_precision: no relevant items");
  double ap = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < relevant.size(); ++k) {
    if (!relevant[k]) continue;
    ++hits;
    ap += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return ap / static_cast<double>(relevant_total);
}

std::vector<std::size_t> consonant_ranking(const PhonemeSpace& space, std::size_t query) {
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t j : space.consonants())
    if (j != query) ranked.emplace_back(space.distance(query, j), j);
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::size_t> out;
  out.reserve(ranked.size());
  for (const auto& r : ranked) out.push_back(r.second);
  return out;
}

bool shares_attribute(const Phoneme& a, const Phoneme& b, ConsonantAttribute attribute) {
  switch (attribute) {
    case ConsonantAttribute::Voicing: return a.voiced == b.voiced;
    case ConsonantAttribute::Place: return (a.places & b.places).any();
    case ConsonantAttribute::Manner: return (a.manners & b.manners).any();
  }
  throw DataError("invalid consonant attribute");
}

namespace {

// -1 when the query has no relevant items.
double query_ap(const PhonemeSpace& space, std::size_t query, ConsonantAttribute attribute) {
  const auto ranking = consonant_ranking(space, query);
  std::vector<bool> relevant;
  std::size_t total = 0;
  for (std::size_t j : ranking) {
    relevant.push_back(shares_attribute(space.phoneme(query), space.phoneme(j), attribute));
    total += relevant.back();
  }
  return total == 0 ? -1.0 : average_precision(relevant, total);
}

}  // namespace

double query_average_precision(const PhonemeSpace& space, std::string_view query, ConsonantAttribute attribute) {
  const auto& syms = space.symbols();
  auto it = std::find(syms.begin(), syms.end(), query);
  if (it == syms.end() || !space.phoneme(static_cast<std::size_t>(it - syms.begin())).is_consonant())
    throw DataError("'" + std::string(query) + "' is not a consonant of the space");
  const double ap = query_ap(space, static_cast<std::size_t>(it - syms.begin()), attribute);
  if (ap < 0.0) throw DataError("query '" + std::string(query) + "' has no relevant consonant");
  return ap;
}

double attribute_map(const PhonemeSpace& space, ConsonantAttribute attribute) {
  const auto c = space.consonants();
  if (c.size() < 2) throw DataError("attribute_map needs at least 2 consonants");
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t q : c) {
    const double ap = query_ap(space, q, attribute);
    if (ap < 0.0) continue;
    sum += ap;
    ++counted;
  }
  if (counted == 0) throw DataError("attribute_map: no query has a relevant consonant");
  return sum / static_cast<double>(counted);
}

// ---------------------------------------------------------------------------
// Vowel rank correlation

VowelChartPoint chart_point(const Phoneme& vowel) {
  return {static_cast<double>(vowel.height_level) / kMaxHeightLevel,
          static_cast<double>(vowel.backness_level) / kMaxBacknessLevel, vowel.rounded ? 1.0 : 0.0};
}

double axis_coordinate(const Phoneme& vowel, VowelAxis axis) {
  const auto p = chart_point(vowel);
  switch (axis) {
    case VowelAxis::Height: return p.height;
    case VowelAxis::Backness: return p.backness;
    case VowelAxis::Roundedness: return p.roundedness;
  }
  throw DataError("invalid vowel axis");
}

std::vector<GroundTruthRanking> vowel_ground_truth_rankings(std::string_view target, VowelAxis axis,
                                                            const AttributeTable& table,
                                                            const std::vector<std::string>& vowel_set) {
  const Phoneme* t = table.phoneme(target);
  if (!t || !t->is_vowel()) throw DataError("'" + std::string(target) + "' is not a vowel");

  std::vector<const Phoneme*> pool;
  for (const auto& p : table.phonemes()) {
    if (!p.is_vowel()) continue;
    if (p.symbol == t->symbol || vowel_set.empty() ||
        std::find(vowel_set.begin(), vowel_set.end(), p.symbol) != vowel_set.end())
      pool.push_back(&p);
  }

  std::vector<VowelAxis> shared;
  for (VowelAxis a : {VowelAxis::Height, VowelAxis::Backness, VowelAxis::Roundedness})
    if (a != axis) shared.push_back(a);
  // Backness is listed before roundedness, height before both.
  static constexpr const char* kNames[] = {"height", "backness", "roundedness"};

  std::vector<GroundTruthRanking> out;
  for (VowelAxis s : shared) {
    std::vector<std::pair<double, const Phoneme*>> slice;
    for (const Phoneme* p : pool)
      if (axis_coordinate(*p, s) == axis_coordinate(*t, s))
        slice.emplace_back(std::abs(axis_coordinate(*p, axis) - axis_coordinate(*t, axis)), p);
    if (slice.size() < 2) continue;
    std::stable_sort(slice.begin(), slice.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    GroundTruthRanking r;
    r.shared_attribute = kNames[static_cast<int>(s)];
    for (const auto& [d, p] : slice) {
      r.vowels.push_back(p->symbol);
      r.distance.push_back(d);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

SpearmanResult spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DataError("spearman: rankings differ in length");
  if (a.size() < 2) throw DataError("spearman: need at least 2 items");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const Eigen::Map<const Eigen::VectorXd> x(ra.data(), static_cast<Eigen::Index>(ra.size()));
  const Eigen::Map<const Eigen::VectorXd> y(rb.data(), static_cast<Eigen::Index>(rb.size()));
  const Eigen::VectorXd xc = x.array() - x.mean();
  const Eigen::VectorXd yc = y.array() - y.mean();
  const double sxx = xc.squaredNorm();
  const double syy = yc.squaredNorm();
  if (sxx == 0.0 || syy == 0.0) return {0.0, true};
  return {std::clamp(xc.dot(yc) / std::sqrt(sxx * syy), -1.0, 1.0), false};
}

double vowel_rank_correlation(const PhonemeSpace& space, VowelAxis axis) {
  const auto vowel_rows = space.vowels();
  if (vowel_rows.size() < 2) throw DataError("vowel_rank_correlation needs at least 2 vowels");
  std::vector<std::string> vowel_set;
  for (std::size_t i : vowel_rows) vowel_set.push_back(space.symbols()[i]);
  auto row_of = [&](const std::string& sym) {
    return static_cast<std::size_t>(std::find(space.symbols().begin(), space.symbols().end(), sym) -
                                    space.symbols().begin());
  };

  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t v : vowel_rows) {
    for (const auto& gt : vowel_ground_truth_rankings(space.symbols()[v], axis, space.table(), vowel_set)) {
      std::vector<double> predicted;
      for (const auto& sym : gt.vowels) predicted.push_back(space.distance(v, row_of(sym)));
      const auto truth_ranks = average_ranks(gt.distance);
      if (std::all_of(truth_ranks.begin(), truth_ranks.end(), [&](double r) { return r == truth_ranks[0]; }))
        continue;
      sum += spearman(gt.distance, predicted).value;
      ++counted;
    }
  }
  if (counted == 0) throw DataError("vowel_rank_correlation: no ground-truth ranking has variance");
  return sum / static_cast<double>(counted);
}

MetricReport evaluate_space(const PhonemeSpace& space) {
  MetricReport r;
  r.silhouette = silhouette(space);
  r.map_voicing = attribute_map(space, ConsonantAttribute::Voicing);
  r.map_place = attribute_map(space, ConsonantAttribute::Place);
  r.map_manner = attribute_map(space, ConsonantAttribute::Manner);
  r.rc_height = vowel_rank_correlation(space, VowelAxis::Height);
  r.rc_backness = vowel_rank_correlation(space, VowelAxis::Backness);
  r.rc_roundedness = vowel_rank_correlation(space, VowelAxis::Roundedness);
  return r;
}

void write_metric_report(std::ostream& out, const MetricReport& r) {
  const auto old = out.precision(10);
  out << "metric\tvalue\n"
      << "silhouette_consonant\t" << r.silhouette.consonant << '\n'
      << "silhouette_vowel\t" << r.silhouette.vowel << '\n'
      << "map_voicing\t" << r.map_voicing << '\n'
      << "map_place\t" << r.map_place << '\n'
      << "map_manner\t" << r.map_manner << '\n'
      << "rc_height\t" << r.rc_height << '\n'
      << "rc_backness\t" << r.rc_backness << '\n'
      << "rc_roundedness\t" << r.rc_roundedness << '\n';
  out.precision(old);
}

// ---------------------------------------------------------------------------
// PCA

SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& symmetric, double tolerance, int max_sweeps) {
  const Eigen::Index n = symmetric.rows();
  if (symmetric.cols() != n) throw DataError("jacobi_eigen: matrix is not square");
  Eigen::MatrixXd a = symmetric;
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = a.norm();

  auto off_diagonal = [&] {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  int sweep = 0;
  for (; sweep < max_sweeps && off_diagonal() > tolerance * scale; ++sweep) {
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return a(x, x) > a(y, y); });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  out.sweeps = sweep;
  return out;
}

PcaResult pca(const Eigen::MatrixXd& points, std::size_t k) {
  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();
  if (n < static_cast<Eigen::Index>(k) + 1)
    throw DataError("pca: need at least k+1 = " + std::to_string(k + 1) + " points");
  const Eigen::MatrixXd centred = points.rowwise() - points.colwise().mean();
  const double dof = static_cast<double>(n - 1);

  // Work in the smaller of the covariance (D x D) and Gram (n x n) spaces.
  Eigen::VectorXd values;
  Eigen::MatrixXd components;
  if (d <= n) {
    const auto eig = jacobi_eigen(centred.transpose() * centred / dof);
    values = eig.values;
    components = eig.vectors;
  } else {
    const auto eig = jacobi_eigen(centred * centred.transpose() / dof);
    values = eig.values;
    components.resize(d, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lambda = std::max(values(i), 0.0);
      components.col(i) = lambda > 0.0 ? Eigen::VectorXd(centred.transpose() * eig.vectors.col(i) / std::sqrt(dof * lambda))
                                       : Eigen::VectorXd::Zero(d);
    }
  }

  const double largest = values.size() > 0 ? std::max(values(0), 0.0) : 0.0;
  const double floor = 1e-10 * std::max(largest, 1e-300);
  Eigen::Index kept = 0;
  while (kept < static_cast<Eigen::Index>(k) && kept < values.size() && values(kept) > floor && largest > 0.0) ++kept;

  PcaResult out;
  out.rank_deficient = kept < static_cast<Eigen::Index>(k);
  out.eigenvalues = values.head(kept);
  out.components = components.leftCols(kept);
  for (Eigen::Index c = 0; c < kept; ++c) {
    auto col = out.components.col(c);
    col.normalize();
    Eigen::Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    if (col(arg) < 0.0) col = -col;
  }
  out.coordinates = centred * out.components;
  return out;
}

PcaResult pca_export(const PhonemeSpace& space, std::size_t k) {
  PcaResult out = pca(space.points(), k);
  out.symbols = space.symbols();
  for (std::size_t i = 0; i < space.size(); ++i) out.is_consonant.push_back(space.phoneme(i).is_consonant());
  return out;
}

void write_pca_tsv(std::ostream& out, const PcaResult& r) {
  const auto old = out.precision(10);
  out << "symbol\tclass";
  for (Eigen::Index c = 0; c < r.coordinates.cols(); ++c) out << "\tpc" << c + 1;
  out << '\n';
  for (std::size_t i = 0; i < r.symbols.size(); ++i) {
    out << r.symbols[i] << '\t' << (r.is_consonant[i] ? "consonant" : "vowel");
    for (Eigen::Index c = 0; c < r.coordinates.cols(); ++c) out << '\t' << r.coordinates(static_cast<Eigen::Index>(i), c);
    out << '\n';
  }
  out << "# explained_variance";
  for (Eigen::Index c = 0; c < r.eigenvalues.size(); ++c) out << '\t' << r.eigenvalues(c);
  out << (r.rank_deficient ? "\n# rank_deficient\n" : "\n");
  out.precision(old);
}

}  // namespace ipakit
