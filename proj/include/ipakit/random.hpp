#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace ipakit {

using Rng = std::mt19937_64;

/// rows x cols matrix with i.i.d. Normal(0, stddev^2) entries, filled in
/// row-major order so the draw sequence does not depend on storage order.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> random_normal(Eigen::Index rows,
                                                                     Eigen::Index cols,
                                                                     double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = static_cast<Scalar>(dist(rng));
  return m;
}

}  // namespace ipakit
