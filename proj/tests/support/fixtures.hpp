#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "ddfh/core/types.hpp"
#include "ddfh/density/gmm.hpp"
#include "ddfh/rng.hpp"

namespace ddfh::test {

inline InstanceRecord make_record(const FrameId& frame, ClassId cls, double confidence, std::vector<double> embedding,
                                  double length = 4.0) {
  InstanceRecord r;
  r.frame_id = frame;
  r.class_id = cls;
  r.confidence = confidence;
  r.embedding = std::move(embedding);
  r.geometry = {length, 1.8, 1.5, length * 1.8 * 1.5, 0.3, 120.0};
  return r;
}

inline std::string frame_name(std::size_t i) {
  std::string s = std::to_string(i);
  return "fr" + std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

/// Random pool with `frames` frames of 1..max_per_frame instances; the
/// first `labeled` frames are labeled.
inline FramePool random_pool(std::uint64_t seed, std::size_t frames, std::size_t labeled, int classes = 3,
                             std::size_t dim = 6, std::size_t max_per_frame = 3) {
  Rng rng(seed);
  FramePool::FrameMap map;
  std::set<FrameId> lab;
  for (std::size_t f = 0; f < frames; ++f) {
    const auto id = frame_name(f);
    if (f < labeled) lab.insert(id);
    const std::size_t count = 1 + static_cast<std::size_t>(rng.below(max_per_frame));
    for (std::size_t i = 0; i < count; ++i) {
      const auto cls = static_cast<ClassId>(rng.below(static_cast<std::uint64_t>(classes)));
      std::vector<double> e(dim);
      for (auto& v : e) v = rng.normal(3.0 * cls, 1.0);
      auto r = make_record(id, cls, rng.uniform(0.2, 1.0), std::move(e), rng.uniform(0.5, 5.0));
      r.geometry.width = rng.uniform(0.4, 2.5);
      r.geometry.height = rng.uniform(0.8, 2.5);
      r.geometry.volume = r.geometry.length * r.geometry.width * r.geometry.height;
      r.geometry.rotation = rng.uniform(-3.0, 3.0);
      r.geometry.point_density = std::floor(rng.uniform(0.0, 500.0));
      map[id].push_back(std::move(r));
    }
  }
  return FramePool(std::move(map), std::move(lab), classes);
}

inline FusedFeature random_feature(Rng& rng, double sd = 1.0) {
  FusedFeature f;
  for (auto& v : f.values) v = rng.normal(0.0, sd);
  return f;
}

/// Random SPD matrix with eigenvalues in [lo, hi].
template <int Dim>
Covariance<Dim> random_spd(Rng& rng, double lo, double hi) {
  Eigen::Matrix<double, Dim, Dim> a;
  for (int i = 0; i < Dim; ++i) {
    for (int j = 0; j < Dim; ++j) a(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::Matrix<double, Dim, Dim>> qr(a);
  const Eigen::Matrix<double, Dim, Dim> q = qr.householderQ();
  Eigen::Matrix<double, Dim, 1> eig;
  for (int i = 0; i < Dim; ++i) eig[i] = rng.uniform(lo, hi);
  Covariance<Dim> c = q * eig.asDiagonal() * q.transpose();
  return 0.5 * (c + c.transpose());
}

template <int Dim>
GaussianMixture<Dim> random_mixture(Rng& rng, std::size_t k, double spread = 2.0, double eig_lo = 0.3,
                                    double eig_hi = 2.0) {
  std::vector<double> w(k);
  double total = 0.0;
  for (auto& v : w) total += (v = rng.uniform(0.1, 1.0));
  for (auto& v : w) v /= total;
  std::vector<Point<Dim>> means(k);
  std::vector<Covariance<Dim>> covs(k);
  for (std::size_t c = 0; c < k; ++c) {
    for (int d = 0; d < Dim; ++d) means[c][d] = rng.normal(0.0, spread);
    covs[c] = random_spd<Dim>(rng, eig_lo, eig_hi);
  }
  return GaussianMixture<Dim>(std::move(w), std::move(means), std::move(covs), std::min(eig_lo, 1e-2));
}

/// Two isotropic Gaussian clusters (sigma 1) whose centers are
/// `separation` apart; the first half of the rows is cluster 0.
inline Eigen::MatrixXd two_clusters(std::uint64_t seed, std::size_t n, std::size_t dim, double separation,
                                    std::vector<int>& labels) {
  Rng rng(seed);
  std::vector<double> dir(dim);
  double norm = 0.0;
  for (auto& v : dir) {
    v = rng.normal();
    norm += v * v;
  }
  for (auto& v : dir) v /= std::sqrt(norm);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = i < n / 2 ? 0 : 1;
    labels[i] = c;
    for (std::size_t d = 0; d < dim; ++d) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = rng.normal() + c * separation * dir[d];
    }
  }
  return x;
}

/// Fraction of points whose nearest label centroid is their own label.
inline double nearest_centroid_accuracy(const std::vector<std::array<double, 2>>& y, const std::vector<int>& labels) {
  double cx[2] = {0, 0}, cy[2] = {0, 0}, cnt[2] = {0, 0};
  for (std::size_t i = 0; i < y.size(); ++i) {
    cx[labels[i]] += y[i][0];
    cy[labels[i]] += y[i][1];
    cnt[labels[i]] += 1;
  }
  for (int c = 0; c < 2; ++c) {
    cx[c] /= cnt[c];
    cy[c] /= cnt[c];
  }
  std::size_t hit = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double best = 0.0;
    int arg = -1;
    for (int c = 0; c < 2; ++c) {
      const double d = (y[i][0] - cx[c]) * (y[i][0] - cx[c]) + (y[i][1] - cy[c]) * (y[i][1] - cy[c]);
      if (arg < 0 || d < best) {
        best = d;
        arg = c;
      }
    }
    if (arg == labels[i]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(y.size());
}

}  // namespace ddfh::test
