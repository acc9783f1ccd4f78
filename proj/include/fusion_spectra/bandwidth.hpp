#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace fusion_spectra {

enum class BandwidthKind { classic, percentile };

inline std::string to_string(BandwidthKind k) { return k == BandwidthKind::classic ? "classic" : "percentile"; }

struct BandwidthPolicy {
  BandwidthKind kind = BandwidthKind::classic;
  double omega1 = 0.5;
  double omega2 = 0.5;

  void validate() const {
    if (kind == BandwidthKind::percentile) {
      for (double w : {omega1, omega2})
        if (!(w > 0.0 && w < 1.0)) throw ConfigError("percentile bandwidth needs omega in (0,1)");
    }
  }
};

/// h = p; already in squared-distance units.
inline double classic_bandwidth(std::size_t p) { return static_cast<double>(p); }

/// Nearest-rank percentile: the ceil(omega * m)-th smallest of m values (1-based, no interpolation).
inline double nearest_rank_value(std::vector<double> values, double omega) {
  if (values.empty()) throw InputError("nearest_rank_value: empty sample");
  if (!(omega > 0.0 && omega < 1.0)) throw ParameterError("nearest_rank_value: omega must lie in (0,1)");
  const auto m = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(omega * static_cast<double>(m)));
  rank = std::clamp<std::size_t>(rank, 1, m);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
  return values[rank - 1];
}

/// Bandwidth from a list of pairwise distances: squared nearest-rank percentile.
inline double bandwidth_from_distances(std::span<const double> distances, double omega) {
  const double d = nearest_rank_value(std::vector<double>(distances.begin(), distances.end()), omega);
  if (!(d > 0.0)) throw InputError("percentile bandwidth: zero bandwidth (degenerate distances)");
  return d * d;
}

/// Same rule from a precomputed squared-distance matrix (upper triangle, off-diagonal).
/// The square root is monotone, so selecting on squared distances picks the same pair.
inline double percentile_bandwidth_sq(const Eigen::MatrixXd& sq_dists, double omega) {
  const Eigen::Index n = sq_dists.cols();
  if (n < 2) throw InputError("percentile bandwidth needs at least two points");
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j + 1; i < n; ++i) vals.push_back(sq_dists(i, j));
  const double h = nearest_rank_value(std::move(vals), omega);
  if (!(h > 0.0)) throw InputError("percentile bandwidth: zero bandwidth (degenerate distances)");
  return h;
}

/// Percentile bandwidth of the columns of P, in squared-distance units.
inline double percentile_bandwidth(const Eigen::MatrixXd& P, double omega) {
  const Eigen::Index n = P.cols();
  if (n < 2) throw InputError("percentile bandwidth needs at least two points");
  if (!P.allFinite()) throw InputError("percentile bandwidth: non-finite entry");
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j + 1; i < n; ++i) vals.push_back((P.col(i) - P.col(j)).squaredNorm());
  const double h = nearest_rank_value(std::move(vals), omega);
  if (!(h > 0.0)) throw InputError("percentile bandwidth: zero bandwidth (degenerate distances)");
  return h;
}

}  // namespace fusion_spectra
