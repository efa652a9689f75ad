#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "ddfh/core/types.hpp"
#include "ddfh/density/kmeanspp.hpp"
#include "ddfh/error.hpp"

namespace ddfh {

template <int Dim>
using Covariance = Eigen::Matrix<double, Dim, Dim>;

/// Full-covariance Gaussian mixture. Parameters are validated on
/// construction and immutable afterwards.
template <int Dim>
class GaussianMixture {
 public:
  using Vec = Point<Dim>;
  using Mat = Covariance<Dim>;

  GaussianMixture() = default;

  GaussianMixture(std::vector<double> weights, std::vector<Vec> means, std::vector<Mat> covariances,
                  double reg_covar, std::size_t fitted_on = 0, std::uint64_t seed = 0)
      : weights_(std::move(weights)),
        means_(std::move(means)),
        covariances_(std::move(covariances)),
        reg_covar_(reg_covar),
        fitted_on_(fitted_on),
        seed_(seed) {
    const std::size_t k = weights_.size();
    if (k == 0) throw InvariantError("mixture needs at least one component");
    if (means_.size() != k || covariances_.size() != k) throw InvariantError("mixture parameter sizes disagree");
    if (!(reg_covar_ > 0.0)) throw InvariantError("reg_covar must be positive");
    double total = 0.0;
    for (double w : weights_) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw InvariantError("mixture weights must be nonnegative");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InvariantError("mixture weights must sum to 1");

    log_norm_.resize(k);
    chol_.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
      const Mat& cov = covariances_[c];
      if (!means_[c].allFinite() || !cov.allFinite()) throw InvariantError("non-finite mixture parameters");
      if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, cov.cwiseAbs().maxCoeff())) {
        throw InvariantError("covariance is not symmetric");
      }
      Eigen::SelfAdjointEigenSolver<Mat> eig(cov, Eigen::EigenvaluesOnly);
      if (eig.eigenvalues().minCoeff() < reg_covar_ - 1e-12) {
        throw InvariantError("covariance eigenvalue below reg_covar");
      }
      Eigen::LLT<Mat> llt(cov);
      if (llt.info() != Eigen::Success) throw InvariantError("covariance is not positive definite");
      chol_[c] = llt.matrixL();
      double logdet = 0.0;
      for (int d = 0; d < Dim; ++d) logdet += std::log(chol_[c](d, d));
      log_norm_[c] = -0.5 * Dim * std::log(2.0 * std::numbers::pi) - logdet;
    }
  }

  std::size_t components() const noexcept { return weights_.size(); }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<Vec>& means() const noexcept { return means_; }
  const std::vector<Mat>& covariances() const noexcept { return covariances_; }
  double reg_covar() const noexcept { return reg_covar_; }
  std::size_t fitted_on() const noexcept { return fitted_on_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// log N(x; mu_c, Sigma_c), without the mixture weight.
  double component_log_density(std::size_t c, const Vec& x) const {
    const Vec z = chol_[c].template triangularView<Eigen::Lower>().solve(x - means_[c]);
    return log_norm_[c] - 0.5 * z.squaredNorm();
  }

  /// log sum_c w_c N(x; mu_c, Sigma_c), evaluated with log-sum-exp.
  double log_pdf(const Vec& x) const {
    double best = -std::numeric_limits<double>::infinity();
    std::array<double, 64> small{};
    std::vector<double> large;
    double* terms = small.data();
    if (components() > small.size()) {
      large.resize(components());
      terms = large.data();
    }
    for (std::size_t c = 0; c < components(); ++c) {
      terms[c] = weights_[c] > 0.0 ? std::log(weights_[c]) + component_log_density(c, x)
                                   : -std::numeric_limits<double>::infinity();
      best = std::max(best, terms[c]);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < components(); ++c) sum += std::exp(terms[c] - best);
    return best + std::log(sum);
  }

  /// Mixture density. Floors at the smallest normal double so far-tail
  /// queries stay strictly positive; log_pdf carries the exact value.
  double pdf(const Vec& x) const {
    return std::max(std::exp(log_pdf(x)), std::numeric_limits<double>::min());
  }

  friend bool operator==(const GaussianMixture& a, const GaussianMixture& b) {
    return a.weights_ == b.weights_ && a.means_ == b.means_ && a.covariances_ == b.covariances_ &&
           a.reg_covar_ == b.reg_covar_ && a.fitted_on_ == b.fitted_on_ && a.seed_ == b.seed_;
  }

 private:
  std::vector<double> weights_;
  std::vector<Vec> means_;
  std::vector<Mat> covariances_;
  double reg_covar_ = 1e-2;
  std::size_t fitted_on_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<Mat> chol_;
  std::vector<double> log_norm_;
};

using GmmModel = GaussianMixture<static_cast<int>(kFeatureDim)>;
using FeatureVector = GmmModel::Vec;

inline FeatureVector to_vector(const FusedFeature& f) {
  FeatureVector v;
  for (std::size_t d = 0; d < kFeatureDim; ++d) v[static_cast<Eigen::Index>(d)] = f[d];
  return v;
}

struct GmmOptions {
  std::size_t components = 10;
  double reg_covar = 1e-2;
  std::uint64_t seed = 0;
  int max_iter = 200;
  double tol = 1e-4;

  void validate() const {
    if (components < 1) throw ConfigError("gmm components must be at least 1");
    if (!(reg_covar > 0.0)) throw ConfigError("gmm reg_covar must be positive");
    if (max_iter < 1) throw ConfigError("gmm max_iter must be positive");
    if (!(tol >= 0.0)) throw ConfigError("gmm tol must be nonnegative");
  }
};

template <int Dim>
struct GmmFitResult {
  GaussianMixture<Dim> model;
  /// Average log-likelihood of the parameters entering each EM iteration.
  std::vector<double> log_likelihood;
  std::size_t components = 0;
  int iterations = 0;
  bool converged = false;
  std::size_t reinitialized = 0;
  std::vector<std::string> warnings;
};

namespace detail {

template <int Dim>
struct EmState {
  std::vector<double> weights;
  std::vector<Point<Dim>> means;
  std::vector<Covariance<Dim>> covariances;
};

template <int Dim>
Covariance<Dim> population_covariance(const PointSet<Dim>& data) {
  Point<Dim> mean = Point<Dim>::Zero();
  for (const auto& x : data) mean += x;
  mean /= static_cast<double>(data.size());
  Covariance<Dim> cov = Covariance<Dim>::Zero();
  for (const auto& x : data) cov += (x - mean) * (x - mean).transpose();
  return cov / static_cast<double>(data.size());
}

// M-step from responsibilities (row-major N x K).
template <int Dim>
EmState<Dim> maximize(const PointSet<Dim>& data, const std::vector<double>& resp, std::size_t k, double reg,
                      const std::vector<double>& point_log_density, std::size_t& reinitialized) {
  const std::size_t n = data.size();
  const double tiny = 10.0 * std::numeric_limits<double>::epsilon();
  EmState<Dim> s;
  std::vector<double> mass(k, 0.0);
  s.means.assign(k, Point<Dim>::Zero());
  s.covariances.assign(k, Covariance<Dim>::Zero());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      const double r = resp[i * k + c];
      mass[c] += r;
      s.means[c] += r * data[i];
    }
  }
  std::vector<bool> collapsed(k, false);
  for (std::size_t c = 0; c < k; ++c) {
    collapsed[c] = mass[c] < 1e-8 * static_cast<double>(n);
    mass[c] += tiny;
    s.means[c] /= mass[c];
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      const double r = resp[i * k + c];
      if (r == 0.0) continue;
      const Point<Dim> dev = data[i] - s.means[c];
      s.covariances[c].noalias() += r * (dev * dev.transpose());
    }
  }
  Covariance<Dim> global;
  bool have_global = false;
  for (std::size_t c = 0; c < k; ++c) {
    if (collapsed[c]) {
      // Re-seat an empty component on the worst-explained point.
      if (!have_global) {
        global = population_covariance(data);
        have_global = true;
      }
      std::size_t worst = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (point_log_density[i] < point_log_density[worst]) worst = i;
      }
      s.means[c] = data[worst];
      s.covariances[c] = global;
      mass[c] = 1.0;
      ++reinitialized;
    } else {
      s.covariances[c] /= mass[c];
    }
    s.covariances[c] = 0.5 * (s.covariances[c] + s.covariances[c].transpose()).eval();
    s.covariances[c].diagonal().array() += reg;
  }
  double total = 0.0;
  for (double m : mass) total += m;
  s.weights.resize(k);
  for (std::size_t c = 0; c < k; ++c) s.weights[c] = mass[c] / total;
  return s;
}

template <int Dim>
GaussianMixture<Dim> to_model(EmState<Dim> s, double reg, std::size_t n, std::uint64_t seed) {
  return GaussianMixture<Dim>(std::move(s.weights), std::move(s.means), std::move(s.covariances), reg, n, seed);
}

}  // namespace detail

/// EM fit of a full-covariance mixture, seeded by k-means++ on the
/// canonically ordered rows. reg_covar is added to every covariance
/// diagonal in each M-step.
template <int Dim>
GmmFitResult<Dim> gmm_fit(std::span<const Point<Dim>> points, const GmmOptions& options) {
  options.validate();
  if (points.size() < 2) throw DataError("mixture fit needs at least 2 points, got " + std::to_string(points.size()));
  for (const auto& p : points) {
    if (!p.allFinite()) throw DataError("mixture fit input contains non-finite values");
  }

  GmmFitResult<Dim> out;
  const auto data = canonical_order<Dim>(points);
  const std::size_t n = data.size();
  std::size_t k = options.components;
  if (n < k) {
    out.warnings.push_back("components reduced from " + std::to_string(k) + " to " + std::to_string(n) +
                           " (too few points)");
    k = n;
  }
  out.components = k;

  const auto seeds = kmeanspp_init<Dim>(std::span<const Point<Dim>>(data), k, options.seed);
  std::vector<double> resp(n * k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double d = (data[i] - seeds.centers[c]).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    resp[i * k + best] = 1.0;
  }
  std::vector<double> point_ll(n, 0.0);
  auto model = detail::to_model(detail::maximize(data, resp, k, options.reg_covar, point_ll, out.reinitialized),
                                options.reg_covar, n, options.seed);

  std::vector<double> terms(k);
  for (int iter = 0; iter < options.max_iter; ++iter) {
    // E-step.
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double w = model.weights()[c];
        terms[c] = w > 0.0 ? std::log(w) + model.component_log_density(c, data[i])
                           : -std::numeric_limits<double>::infinity();
        best = std::max(best, terms[c]);
      }
      double sum = 0.0;
      for (std::size_t c = 0; c < k; ++c) sum += std::exp(terms[c] - best);
      const double lse = best + std::log(sum);
      point_ll[i] = lse;
      total += lse;
      for (std::size_t c = 0; c < k; ++c) resp[i * k + c] = std::exp(terms[c] - lse);
    }
    const double avg = total / static_cast<double>(n);
    out.log_likelihood.push_back(avg);
    out.iterations = iter + 1;
    if (out.log_likelihood.size() > 1 && avg - out.log_likelihood[out.log_likelihood.size() - 2] < options.tol) {
      out.converged = true;
      break;
    }
    if (iter + 1 == options.max_iter) break;
    // M-step.
    model = detail::to_model(detail::maximize(data, resp, k, options.reg_covar, point_ll, out.reinitialized),
                             options.reg_covar, n, options.seed);
  }
  if (out.reinitialized > 0) {
    out.warnings.push_back(std::to_string(out.reinitialized) + " collapsed component(s) reinitialized");
  }
  out.model = std::move(model);
  return out;
}

/// Single component at the centroid of `points` with covariance
/// reg_covar * I; for an empty set, a unit Gaussian at the origin.
template <int Dim>
GaussianMixture<Dim> fallback_mixture(std::span<const Point<Dim>> points, double reg_covar, std::uint64_t seed = 0) {
  Point<Dim> mean = Point<Dim>::Zero();
  Covariance<Dim> cov = Covariance<Dim>::Identity();
  if (!points.empty()) {
    for (const auto& p : points) mean += p;
    mean /= static_cast<double>(points.size());
    cov *= reg_covar;
  } else {
    cov *= std::max(1.0, reg_covar);
  }
  return GaussianMixture<Dim>({1.0}, {mean}, {cov}, reg_covar, points.size(), seed);
}

/// Class-density fit with the small-sample fallbacks: fewer than 2 points
/// yields fallback_mixture instead of an error.
template <int Dim>
GmmFitResult<Dim> fit_class_density(std::span<const Point<Dim>> points, const GmmOptions& options) {
  if (points.size() >= 2) return gmm_fit<Dim>(points, options);
  GmmFitResult<Dim> out;
  out.model = fallback_mixture<Dim>(points, options.reg_covar, options.seed);
  out.components = 1;
  out.warnings.push_back(points.empty() ? "no points: unit Gaussian fallback"
                                        : "single point: reg_covar fallback component");
  return out;
}

inline double gmm_pdf(const GmmModel& model, const FusedFeature& f) { return model.pdf(to_vector(f)); }

inline double gmm_log_pdf(const GmmModel& model, const FusedFeature& f) { return model.log_pdf(to_vector(f)); }

/// Distribution-discrepancy score: unlabeled density minus labeled density.
inline double dd_score(const GmmModel& unlabeled, const GmmModel& labeled, const FusedFeature& f) {
  return gmm_pdf(unlabeled, f) - gmm_pdf(labeled, f);
}

/// Novelty score: negated labeled density.
inline double nov_score(const GmmModel& labeled, const FusedFeature& f) { return -gmm_pdf(labeled, f); }

}  // namespace ddfh
