#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ddfh/core/types.hpp"
#include "ddfh/error.hpp"
#include "ddfh/scoring/quantile.hpp"

namespace ddfh {

/// Feature matrix with one column per instance.
using FeatureMatrix = Eigen::Matrix<double, static_cast<int>(kFeatureDim), Eigen::Dynamic>;

inline FeatureMatrix feature_matrix(std::span<const FusedFeature> columns) {
  FeatureMatrix m(static_cast<Eigen::Index>(kFeatureDim), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    for (std::size_t d = 0; d < kFeatureDim; ++d) {
      m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c)) = columns[c][d];
    }
  }
  return m;
}

namespace detail {

// A row whose spread is at rounding level counts as constant.
inline bool negligible_variance(double variance, double max_abs) {
  const double scale = 1e-14 * std::max(1.0, max_abs);
  return variance <= scale * scale;
}

}  // namespace detail

/// Mean Pearson correlation over all unordered pairs of rows. Pairs that
/// involve a constant row contribute 0.
inline double pearson_mean(const Eigen::Ref<const Eigen::MatrixXd>& features) {
  const Eigen::Index rows = features.rows();
  const Eigen::Index n = features.cols();
  if (n < 2) throw DataError("Pearson correlation needs at least 2 columns, got " + std::to_string(n));
  if (rows < 2) throw DataError("Pearson correlation needs at least 2 feature rows");

  const Eigen::MatrixXd centered = features.colwise() - features.rowwise().mean();
  const Eigen::VectorXd variance = centered.rowwise().squaredNorm() / static_cast<double>(n);
  const Eigen::VectorXd max_abs = features.cwiseAbs().rowwise().maxCoeff();

  double sum = 0.0;
  for (Eigen::Index k = 0; k < rows; ++k) {
    if (detail::negligible_variance(variance[k], max_abs[k])) continue;
    for (Eigen::Index l = k + 1; l < rows; ++l) {
      if (detail::negligible_variance(variance[l], max_abs[l])) continue;
      const double cov = centered.row(k).dot(centered.row(l)) / static_cast<double>(n);
      const double rho = cov / (std::sqrt(variance[k]) * std::sqrt(variance[l]));
      sum += std::clamp(rho, -1.0, 1.0);
    }
  }
  const double pairs = 0.5 * static_cast<double>(rows) * static_cast<double>(rows - 1);
  return sum / pairs;
}

struct HeterogeneityScores {
  /// Sum of per-dimension population variances.
  double s_var = 0.0;
  /// 1 - |mean pairwise correlation|, in [0, 1].
  double s_cor = 0.0;
};

/// Spread and decorrelation of a frame's class instances joined with the
/// labeled instances of the same class.
inline HeterogeneityScores heterogeneity_scores(const FeatureMatrix& frame_class, const FeatureMatrix& labeled_class) {
  if (frame_class.cols() < 1) throw DataError("heterogeneity needs at least one frame instance");
  const Eigen::Index total = frame_class.cols() + labeled_class.cols();
  if (total < 2) throw DataError("heterogeneity needs at least 2 instances in total");

  FeatureMatrix joined(static_cast<Eigen::Index>(kFeatureDim), total);
  joined << frame_class, labeled_class;

  HeterogeneityScores out;
  const Eigen::MatrixXd centered = joined.colwise() - joined.rowwise().mean();
  out.s_var = centered.squaredNorm() / static_cast<double>(total);
  out.s_cor = std::clamp(1.0 - std::abs(pearson_mean(joined)), 0.0, 1.0);
  return out;
}

/// Raw per-instance discrepancy and novelty scores.
struct InstanceScores {
  double s_dd = 0.0;
  double s_nov = 0.0;
};

/// Mean over the frame's instances of psi_dd(s_dd) + psi_nov(s_nov); 0 for
/// an empty frame.
inline double frame_i_dd(std::span<const InstanceScores> instances, const QuantileMap& dd_map,
                         const QuantileMap& nov_map) {
  if (instances.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : instances) sum += dd_map(s.s_dd) + nov_map(s.s_nov);
  return sum / static_cast<double>(instances.size());
}

/// Sum over the present classes of psi_var(s_var) * psi_cor(s_cor), divided
/// by the total class count. Absent classes contribute 0.
inline double frame_i_fh(std::span<const HeterogeneityScores> present_classes, const QuantileMap& var_map,
                         const QuantileMap& cor_map, int class_count) {
  if (class_count < 1) throw ConfigError("class count must be at least 1");
  if (present_classes.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& h : present_classes) sum += var_map(h.s_var) * cor_map(h.s_cor);
  return sum / static_cast<double>(class_count);
}

/// Entropy (natural log) of the softmax of per-class confidence sums.
inline double frame_i_cb(std::span<const double> confidence_sums) {
  if (confidence_sums.empty()) throw DataError("confidence balance needs at least one class");
  double top = -std::numeric_limits<double>::infinity();
  for (double p : confidence_sums) top = std::max(top, p);
  double z = 0.0;
  for (double p : confidence_sums) z += std::exp(p - top);
  const double log_z = std::log(z);
  double entropy = 0.0;
  for (double p : confidence_sums) {
    const double log_phi = (p - top) - log_z;
    entropy -= std::exp(log_phi) * log_phi;
  }
  const double ceiling = std::log(static_cast<double>(confidence_sums.size()));
  return std::clamp(entropy, 0.0, ceiling);
}

/// (I_dd + I_fh) * I_cb.
inline double frame_i_total(double i_dd, double i_fh, double i_cb) { return (i_dd + i_fh) * i_cb; }

}  // namespace ddfh
