#pragma once

// Exact t-SNE: O(N^2) input affinities with per-point perplexity
// calibration, Student-t output kernel, gradient descent with momentum,
// per-parameter gains and early exaggeration.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ddfh/core/fuse.hpp"
#include "ddfh/core/types.hpp"
#include "ddfh/error.hpp"
#include "ddfh/rng.hpp"

namespace ddfh {

struct TsneConfig {
  double perplexity = 100.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch = 250;
  /// Stddev of the random normal initialization.
  double init_scale = 1e-4;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(perplexity > 0.0)) throw ConfigError("tsne perplexity must be positive");
    if (iterations < 1) throw ConfigError("tsne iterations must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("tsne learning rate must be positive");
    if (!(early_exaggeration > 0.0)) throw ConfigError("tsne early exaggeration must be positive");
    if (exaggeration_iterations < 0 || momentum_switch < 0) {
      throw ConfigError("tsne schedule lengths must be nonnegative");
    }
    if (!(initial_momentum >= 0.0 && initial_momentum < 1.0 && final_momentum >= 0.0 && final_momentum < 1.0)) {
      throw ConfigError("tsne momentum must lie in [0, 1)");
    }
    if (!(init_scale > 0.0)) throw ConfigError("tsne init scale must be positive");
  }
};

struct PerplexityResult {
  double beta = 1.0;
  double entropy = 0.0;
  /// Conditional neighbour distribution, aligned with the input distances.
  std::vector<double> probabilities;
  bool degenerate = false;
  bool converged = false;
  int iterations = 0;
};

/// Binary search for the Gaussian precision whose conditional distribution
/// over `sq_distances` has entropy log(perplexity).
inline PerplexityResult perplexity_calibration(std::span<const double> sq_distances, double perplexity,
                                               double tol = 1e-5, int max_iter = 100) {
  PerplexityResult res;
  const std::size_t m = sq_distances.size();
  res.probabilities.assign(m, m ? 1.0 / static_cast<double>(m) : 0.0);
  if (m == 0) {
    res.degenerate = true;
    return res;
  }

  double dmin = std::numeric_limits<double>::infinity();
  double dmax = 0.0;
  for (double d : sq_distances) {
    dmin = std::min(dmin, d);
    dmax = std::max(dmax, d);
  }
  if (!(dmax > 0.0)) {
    res.degenerate = true;
    res.entropy = std::log(static_cast<double>(m));
    return res;
  }

  const double target = std::log(perplexity);
  auto evaluate = [&](double beta) {
    double z = 0.0;
    double weighted = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double shifted = sq_distances[j] - dmin;
      const double p = std::exp(-beta * shifted);
      res.probabilities[j] = p;
      z += p;
      weighted += shifted * p;
    }
    for (auto& p : res.probabilities) p /= z;
    return std::log(z) + beta * weighted / z;
  };

  double beta = 1.0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  double entropy = evaluate(beta);
  int it = 0;
  while (std::abs(entropy - target) > tol && it < max_iter) {
    if (entropy > target) {
      lo = beta;
      beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
    } else {
      hi = beta;
      beta = std::isinf(lo) ? beta * 0.5 : 0.5 * (beta + lo);
    }
    entropy = evaluate(beta);
    ++it;
  }
  res.beta = beta;
  res.entropy = entropy;
  res.converged = std::abs(entropy - target) <= tol;
  res.iterations = it;
  return res;
}

/// Largest usable perplexity for N points.
inline double effective_perplexity(std::size_t n, double perplexity) {
  const double cap = (static_cast<double>(n) - 1.0) / 3.0;
  return perplexity < cap ? perplexity : cap;
}

/// Symmetric N x N matrix with zero diagonal stored as the strict upper
/// triangle, row-major.
class PackedSymmetric {
 public:
  PackedSymmetric() = default;
  explicit PackedSymmetric(std::size_t n) : n_(n), data_(n > 1 ? n * (n - 1) / 2 : 0, 0.0) {}

  std::size_t size() const noexcept { return n_; }
  std::size_t row_offset(std::size_t i) const noexcept { return i * n_ - i * (i + 1) / 2; }

  double operator()(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    if (i > j) std::swap(i, j);
    return data_[row_offset(i) + (j - i - 1)];
  }
  double& upper(std::size_t i, std::size_t j) { return data_[row_offset(i) + (j - i - 1)]; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

struct AffinityResult {
  PackedSymmetric p;
  std::size_t degenerate_rows = 0;
  std::size_t unconverged_rows = 0;
};

/// Symmetrized input affinities p_ij = (p_{j|i} + p_{i|j}) / 2N.
inline AffinityResult joint_affinities(const Eigen::MatrixXd& x, double perplexity) {
  const std::size_t n = static_cast<std::size_t>(x.rows());
  AffinityResult out{PackedSymmetric(n)};
  PackedSymmetric dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      dist.upper(i, j) = (x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(j))).squaredNorm();
    }
  }
  std::vector<double> row(n > 0 ? n - 1 : 0);
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0, k = 0; j < n; ++j) {
      if (j != i) row[k++] = dist(i, j);
    }
    const auto cal = perplexity_calibration(row, perplexity);
    if (cal.degenerate) ++out.degenerate_rows;
    else if (!cal.converged) ++out.unconverged_rows;
    for (std::size_t j = 0, k = 0; j < n; ++j) {
      if (j == i) continue;
      const double v = cal.probabilities[k++] * scale;
      if (i < j) out.p.upper(i, j) += v;
      else out.p.upper(j, i) += v;
    }
  }
  return out;
}

/// KL(P || Q) for output coordinates `y` under the Student-t kernel.
inline double tsne_kl_divergence(const PackedSymmetric& p, const ReducedCoords& y) {
  const std::size_t n = y.size();
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = y[i][0] - y[j][0];
      const double dy = y[i][1] - y[j][1];
      z += 1.0 / (1.0 + dx * dx + dy * dy);
    }
  }
  z *= 2.0;
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double pij = p(i, j);
      if (pij <= 0.0) continue;
      const double dx = y[i][0] - y[j][0];
      const double dy = y[i][1] - y[j][1];
      const double q = 1.0 / (1.0 + dx * dx + dy * dy) / z;
      kl += pij * std::log(pij / q);
    }
  }
  return 2.0 * kl;
}

struct TsneDiagnostics {
  double initial_kl = 0.0;
  double final_kl = 0.0;
  double requested_perplexity = 0.0;
  double effective_perplexity = 0.0;
  bool perplexity_clamped = false;
  std::size_t degenerate_rows = 0;
  std::size_t unconverged_rows = 0;
  int iterations = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

struct TsneResult {
  ReducedCoords coords;
  TsneDiagnostics diagnostics;
};

namespace detail {

inline void recenter(ReducedCoords& y) {
  if (y.empty()) return;
  double mx = 0.0, my = 0.0;
  for (const auto& p : y) {
    mx += p[0];
    my += p[1];
  }
  mx /= static_cast<double>(y.size());
  my /= static_cast<double>(y.size());
  for (auto& p : y) {
    p[0] -= mx;
    p[1] -= my;
  }
}

// Two doubles handled elementwise by the compiler on any target.
inline constexpr std::size_t kLanes = 2;
using Lanes = double __attribute__((vector_size(kLanes * sizeof(double))));

inline Lanes load(const double* p) {
  Lanes v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store(double* p, const Lanes& v) { std::memcpy(p, &v, sizeof v); }

inline double lane_sum(const Lanes& v) { return v[0] + v[1]; }

}  // namespace detail

/// Projects the rows of `embeddings` (N x D) to 2-D.
inline TsneResult tsne_reduce(const Eigen::MatrixXd& embeddings, const TsneConfig& config) {
  config.validate();
  const std::size_t n = static_cast<std::size_t>(embeddings.rows());
  if (n < 4) throw DataError("t-SNE needs at least 4 points, got " + std::to_string(n));
  if (!embeddings.allFinite()) throw DataError("t-SNE input contains non-finite values");

  TsneResult result;
  auto& diag = result.diagnostics;
  diag.requested_perplexity = config.perplexity;
  diag.effective_perplexity = effective_perplexity(n, config.perplexity);
  diag.perplexity_clamped = diag.effective_perplexity < config.perplexity;
  diag.seed = config.seed;
  diag.iterations = config.iterations;
  if (diag.perplexity_clamped) {
    diag.warnings.push_back("perplexity " + std::to_string(config.perplexity) + " clamped to " +
                            std::to_string(diag.effective_perplexity) + " for " + std::to_string(n) + " points");
  }

  auto affinities = joint_affinities(embeddings, diag.effective_perplexity);
  diag.degenerate_rows = affinities.degenerate_rows;
  diag.unconverged_rows = affinities.unconverged_rows;
  const PackedSymmetric& p = affinities.p;

  Rng rng(config.seed, "tsne/init");
  ReducedCoords& y = result.coords;
  y.resize(n);
  for (auto& pt : y) {
    pt[0] = config.init_scale * rng.normal();
    pt[1] = config.init_scale * rng.normal();
  }
  diag.initial_kl = tsne_kl_divergence(p, y);

  ReducedCoords update(n, {0.0, 0.0});
  ReducedCoords gains(n, {1.0, 1.0});
  // Coordinates and force accumulators split by axis so the pair loop
  // vectorizes.
  std::vector<double> px(n), py(n), ax(n), ay(n), rx(n), ry(n);
  const auto& pd = p.data();

  for (int iter = 0; iter < config.iterations; ++iter) {
    const double exaggeration = iter < config.exaggeration_iterations ? config.early_exaggeration : 1.0;
    const double momentum = iter < config.momentum_switch ? config.initial_momentum : config.final_momentum;
    for (std::size_t i = 0; i < n; ++i) {
      px[i] = y[i][0];
      py[i] = y[i][1];
    }
    std::fill(ax.begin(), ax.end(), 0.0);
    std::fill(ay.begin(), ay.end(), 0.0);
    std::fill(rx.begin(), rx.end(), 0.0);
    std::fill(ry.begin(), ry.end(), 0.0);

    // One pass: attraction p*num*(yi-yj) and repulsion num^2*(yi-yj) are
    // accumulated apart; the normalizer is applied afterwards. Pairs run
    // four at a time in two fixed two-wide lane groups, so the sum order
    // never depends on the target instruction set.
    double z = 0.0;
    for (std::size_t i = 0, k = 0; i < n; ++i) {
      const double xi = px[i], yi = py[i];
      const double* prow = pd.data() + k;
      const std::size_t len = n - i - 1;
      double* axj = ax.data() + i + 1;
      double* ayj = ay.data() + i + 1;
      double* rxj = rx.data() + i + 1;
      double* ryj = ry.data() + i + 1;
      const double* xj = px.data() + i + 1;
      const double* yj = py.data() + i + 1;
      using detail::Lanes;
      Lanes vz[2]{}, vax[2]{}, vay[2]{}, vrx[2]{}, vry[2]{};
      std::size_t t = 0;
      for (; t + 2 * detail::kLanes <= len; t += 2 * detail::kLanes) {
        for (std::size_t h = 0; h < 2; ++h) {
          const std::size_t o = t + h * detail::kLanes;
          const Lanes dx = xi - detail::load(xj + o);
          const Lanes dy = yi - detail::load(yj + o);
          const Lanes num = 1.0 / (1.0 + dx * dx + dy * dy);
          const Lanes a = detail::load(prow + o) * num;
          const Lanes r = num * num;
          vz[h] += num;
          vax[h] += a * dx;
          vay[h] += a * dy;
          vrx[h] += r * dx;
          vry[h] += r * dy;
          detail::store(axj + o, detail::load(axj + o) - a * dx);
          detail::store(ayj + o, detail::load(ayj + o) - a * dy);
          detail::store(rxj + o, detail::load(rxj + o) - r * dx);
          detail::store(ryj + o, detail::load(ryj + o) - r * dy);
        }
      }
      auto sum = [](const Lanes* v) { return detail::lane_sum(v[0]) + detail::lane_sum(v[1]); };
      double sz = sum(vz), sax = sum(vax), say = sum(vay), srx = sum(vrx), sry = sum(vry);
      for (; t < len; ++t) {
        const double dx = xi - xj[t];
        const double dy = yi - yj[t];
        const double num = 1.0 / (1.0 + dx * dx + dy * dy);
        const double a = prow[t] * num;
        const double r = num * num;
        sz += num;
        sax += a * dx;
        say += a * dy;
        srx += r * dx;
        sry += r * dy;
        axj[t] -= a * dx;
        ayj[t] -= a * dy;
        rxj[t] -= r * dx;
        ryj[t] -= r * dy;
      }
      ax[i] += sax;
      ay[i] += say;
      rx[i] += srx;
      ry[i] += sry;
      z += sz;
      k += len;
    }
    const double inv_z = 1.0 / (2.0 * z);

    for (std::size_t i = 0; i < n; ++i) {
      const double grad[2] = {exaggeration * ax[i] - inv_z * rx[i], exaggeration * ay[i] - inv_z * ry[i]};
      for (std::size_t d = 0; d < kReducedDim; ++d) {
        const double g = 4.0 * grad[d];
        double& gain = gains[i][d];
        gain = ((g > 0.0) != (update[i][d] > 0.0)) ? gain + 0.2 : gain * 0.8;
        gain = std::max(gain, 0.01);
        update[i][d] = momentum * update[i][d] - config.learning_rate * gain * g;
        y[i][d] += update[i][d];
      }
    }
    detail::recenter(y);
  }

  diag.final_kl = tsne_kl_divergence(p, y);
  for (const auto& pt : y) {
    if (!std::isfinite(pt[0]) || !std::isfinite(pt[1])) throw InvariantError("t-SNE produced non-finite output");
  }
  return result;
}

/// Embedding rows of `pool` in canonical instance order.
inline Eigen::MatrixXd embedding_matrix(const FramePool& pool) {
  const auto n = static_cast<Eigen::Index>(pool.instance_count());
  const auto d = static_cast<Eigen::Index>(pool.embedding_dim());
  Eigen::MatrixXd m(n, d);
  Eigen::Index row = 0;
  for (const auto& [id, records] : pool.frames()) {
    for (const auto& r : records) {
      for (Eigen::Index c = 0; c < d; ++c) m(row, c) = r.embedding[static_cast<std::size_t>(c)];
      ++row;
    }
  }
  return m;
}

}  // namespace ddfh
