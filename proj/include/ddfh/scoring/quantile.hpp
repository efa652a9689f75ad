#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ddfh/error.hpp"
#include "ddfh/scoring/normal.hpp"

namespace ddfh {

/// Rank-based normalizer psi(S, .): the empirical CDF of a reference set S
/// composed with the inverse standard normal CDF.
///
/// The order statistic of rank r (1-based) out of n sits at probability
/// (r - 0.5) / n; tied values share the mean of their ranks. Between
/// distinct reference values the probability is interpolated linearly.
/// Queries outside the reference range clamp to `clip` / 1 - `clip`.
class QuantileMap {
 public:
  static constexpr double kDefaultClip = 1e-7;

  /// Fits on a copy of `scores`. Throws DataError on empty or non-finite input.
  static QuantileMap fit(std::span<const double> scores, double clip = kDefaultClip) {
    if (scores.empty()) throw DataError("quantile transform needs at least one reference value");
    if (!(clip > 0.0 && clip < 0.5)) throw ConfigError("quantile clip must lie in (0, 0.5)");
    QuantileMap map;
    map.clip_ = clip;
    map.reference_.assign(scores.begin(), scores.end());
    for (double v : map.reference_) {
      if (!std::isfinite(v)) throw DataError("quantile transform reference contains non-finite values");
    }
    std::sort(map.reference_.begin(), map.reference_.end());

    const double n = static_cast<double>(map.reference_.size());
    for (std::size_t i = 0; i < map.reference_.size();) {
      std::size_t j = i;
      while (j + 1 < map.reference_.size() && map.reference_[j + 1] == map.reference_[i]) ++j;
      // Ranks i+1 .. j+1 share the value; their mean rank is (i + j) / 2 + 1.
      const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
      map.knots_.push_back(map.reference_[i]);
      map.levels_.push_back((mean_rank - 0.5) / n);
      i = j + 1;
    }
    return map;
  }

  const std::vector<double>& reference() const noexcept { return reference_; }
  double clip() const noexcept { return clip_; }

  /// Empirical CDF level of `x` after clipping.
  double level(double x) const {
    double q;
    if (x < knots_.front()) {
      q = clip_;
    } else if (x > knots_.back()) {
      q = 1.0 - clip_;
    } else {
      const auto it = std::lower_bound(knots_.begin(), knots_.end(), x);
      const auto hi = static_cast<std::size_t>(it - knots_.begin());
      if (*it == x) {
        q = levels_[hi];
      } else {
        const std::size_t lo = hi - 1;
        const double t = (x - knots_[lo]) / (knots_[hi] - knots_[lo]);
        q = levels_[lo] + t * (levels_[hi] - levels_[lo]);
      }
    }
    return std::clamp(q, clip_, 1.0 - clip_);
  }

  /// psi(S, x).
  double operator()(double x) const { return normal_quantile(level(x)); }

  friend bool operator==(const QuantileMap& a, const QuantileMap& b) {
    return a.reference_ == b.reference_ && a.clip_ == b.clip_;
  }

 private:
  QuantileMap() = default;

  std::vector<double> reference_;
  std::vector<double> knots_;
  std::vector<double> levels_;
  double clip_ = kDefaultClip;
};

inline QuantileMap qt_fit(std::span<const double> scores, double clip = QuantileMap::kDefaultClip) {
  return QuantileMap::fit(scores, clip);
}

inline double qt_apply(const QuantileMap& map, double x) { return map(x); }

}  // namespace ddfh
