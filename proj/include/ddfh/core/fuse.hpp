#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ddfh/core/types.hpp"
#include "ddfh/error.hpp"

namespace ddfh {

/// N x 2 reduced embedding, one row per instance.
using ReducedCoords = std::vector<std::array<double, kReducedDim>>;

/// Per-dimension z-score parameters.
struct Standardizer {
  std::array<double, kFeatureDim> mean{};
  std::array<double, kFeatureDim> stddev{1, 1, 1, 1, 1, 1, 1, 1};

  FusedFeature apply(const FusedFeature& raw) const {
    FusedFeature out;
    for (std::size_t d = 0; d < kFeatureDim; ++d) out[d] = (raw[d] - mean[d]) / stddev[d];
    return out;
  }
};

/// Unstandardized [reduced_i | geometry_i] rows in pool instance order.
inline std::vector<FusedFeature> raw_features(const ReducedCoords& reduced, const FramePool& pool) {
  if (reduced.size() != pool.instance_count()) {
    throw DataError("reduced embedding has " + std::to_string(reduced.size()) + " rows but the pool has " +
                    std::to_string(pool.instance_count()) + " instances");
  }
  std::vector<FusedFeature> out;
  out.reserve(reduced.size());
  std::size_t row = 0;
  for (const auto& [id, records] : pool.frames()) {
    for (const auto& r : records) {
      FusedFeature f;
      f[0] = reduced[row][0];
      f[1] = reduced[row][1];
      const auto g = r.geometry.as_array();
      for (std::size_t d = 0; d < kGeometryDim; ++d) f[kReducedDim + d] = g[d];
      out.push_back(f);
      ++row;
    }
  }
  return out;
}

/// Population mean/stddev per dimension (two-pass). A dimension whose spread
/// is at rounding level gets stddev 1, so it standardizes to 0.
inline Standardizer fit_standardizer(std::span<const FusedFeature> rows) {
  Standardizer s;
  if (rows.empty()) return s;
  const double n = static_cast<double>(rows.size());
  for (std::size_t d = 0; d < kFeatureDim; ++d) {
    double sum = 0.0;
    for (const auto& r : rows) sum += r[d];
    const double mean = sum / n;
    double ss = 0.0;
    double scale = 0.0;
    for (const auto& r : rows) {
      const double dev = r[d] - mean;
      ss += dev * dev;
      scale = std::max(scale, std::abs(r[d]));
    }
    const double sd = std::sqrt(ss / n);
    s.mean[d] = mean;
    s.stddev[d] = (sd > 1e-12 * std::max(1.0, scale)) ? sd : 1.0;
  }
  return s;
}

/// Fuses reduced embeddings with geometry and standardizes every dimension
/// with `standardizer`. Output is in pool instance order.
inline std::vector<FusedFeature> fuse_features(const ReducedCoords& reduced, const FramePool& pool,
                                               const Standardizer& standardizer) {
  for (double sd : standardizer.stddev) {
    if (!(sd > 0.0)) throw DataError("standardizer stddev must be positive");
  }
  auto rows = raw_features(reduced, pool);
  for (auto& f : rows) {
    f = standardizer.apply(f);
    if (!f.finite()) throw DataError("non-finite fused feature");
  }
  return rows;
}

/// Fits the standardizer on the pool itself (the union of labeled and
/// unlabeled instances) and fuses.
inline std::vector<FusedFeature> fuse_features(const ReducedCoords& reduced, const FramePool& pool) {
  const auto raw = raw_features(reduced, pool);
  return fuse_features(reduced, pool, fit_standardizer(raw));
}

}  // namespace ddfh
