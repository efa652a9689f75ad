#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ddfh/error.hpp"
#include "ddfh/rng.hpp"

namespace ddfh {

template <int Dim>
using Point = Eigen::Matrix<double, Dim, 1>;

template <int Dim>
using PointSet = std::vector<Point<Dim>>;

/// Lexicographic order on points; defines the canonical row order.
template <int Dim>
bool lexicographic_less(const Point<Dim>& a, const Point<Dim>& b) {
  for (int d = 0; d < Dim; ++d) {
    if (a[d] < b[d]) return true;
    if (b[d] < a[d]) return false;
  }
  return false;
}

template <int Dim>
PointSet<Dim> canonical_order(std::span<const Point<Dim>> points) {
  PointSet<Dim> sorted(points.begin(), points.end());
  std::stable_sort(sorted.begin(), sorted.end(), lexicographic_less<Dim>);
  return sorted;
}

template <int Dim>
struct KmeansppResult {
  PointSet<Dim> centers;
  /// Set when fewer points than centers were available.
  bool degenerate = false;
};

/// k-means++ seeding. Sampling runs over the canonically sorted rows, so
/// the centers depend only on the multiset of points and the seed.
template <int Dim>
KmeansppResult<Dim> kmeanspp_init(std::span<const Point<Dim>> points, std::size_t k, std::uint64_t seed) {
  if (points.empty()) throw DataError("k-means++ needs at least one point");
  if (k == 0) throw ConfigError("k-means++ needs k >= 1");

  const auto data = canonical_order<Dim>(points);
  const std::size_t n = data.size();
  KmeansppResult<Dim> res;

  if (n < k) {
    res.degenerate = true;
    res.centers = data;
    for (std::size_t i = n; i < k; ++i) res.centers.push_back(data[i % n]);
    return res;
  }

  Rng rng(seed, "kmeans++");
  res.centers.push_back(data[rng.below(n)]);
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = (data[i] - res.centers[0]).squaredNorm();

  while (res.centers.size() < k) {
    double total = 0.0;
    for (double d : nearest) total += d;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += nearest[i];
        if (acc > target && nearest[i] > 0.0) {
          pick = i;
          break;
        }
      }
      // Guard the rounding edge where the scan ends on a zero-weight row.
      while (nearest[pick] <= 0.0 && pick > 0) --pick;
    } else {
      pick = rng.below(n);
    }
    res.centers.push_back(data[pick]);
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], (data[i] - data[pick]).squaredNorm());
    }
  }
  return res;
}

}  // namespace ddfh
