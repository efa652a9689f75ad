#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "ddfh/core/fuse.hpp"
#include "ddfh/core/io.hpp"
#include "ddfh/core/types.hpp"
#include "ddfh/error.hpp"
#include "ddfh/reduce/tsne.hpp"
#include "ddfh/rng.hpp"
#include "ddfh/select/pipeline.hpp"
#include "ddfh/select/selection.hpp"

namespace ddfh::harness {

enum class Strategy { ddfh, random, conf_entropy };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::ddfh: return "ddfh";
    case Strategy::random: return "random";
    case Strategy::conf_entropy: return "conf_entropy";
  }
  return "?";
}

inline Strategy parse_strategy(std::string_view text) {
  if (text == "ddfh") return Strategy::ddfh;
  if (text == "random") return Strategy::random;
  if (text == "conf_entropy") return Strategy::conf_entropy;
  throw ConfigError("unknown strategy '" + std::string(text) + "'");
}

/// Shannon entropy (natural log) of the normalized vector.
inline double label_entropy(std::span<const double> values) {
  double total = 0.0;
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DataError("entropy inputs must be nonnegative and finite");
    total += v;
  }
  if (!(total > 0.0)) throw DataError("entropy of an all-zero vector is undefined");
  double h = 0.0;
  for (double v : values) {
    if (v <= 0.0) continue;
    const double p = v / total;
    h -= p * std::log(p);
  }
  return std::clamp(h, 0.0, std::log(static_cast<double>(values.size())));
}

/// Symmetric KL divergence between single Gaussians fitted to two feature
/// sets (population covariance plus `reg` on the diagonal). NaN when
/// either set is empty.
inline double symmetric_gaussian_kl(std::span<const FusedFeature> a, std::span<const FusedFeature> b,
                                    double reg = 1e-2) {
  if (a.empty() || b.empty()) return std::numeric_limits<double>::quiet_NaN();
  using Vec = Eigen::Matrix<double, 8, 1>;
  using Mat = Eigen::Matrix<double, 8, 8>;
  auto moments = [reg](std::span<const FusedFeature> xs, Vec& mean, Mat& cov) {
    mean.setZero();
    for (const auto& f : xs) mean += Eigen::Map<const Vec>(f.values.data());
    mean /= static_cast<double>(xs.size());
    cov.setZero();
    for (const auto& f : xs) {
      const Vec d = Eigen::Map<const Vec>(f.values.data()) - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(xs.size());
    cov.diagonal().array() += reg;
  };
  Vec ma, mb;
  Mat ca, cb;
  moments(a, ma, ca);
  moments(b, mb, cb);
  const Eigen::LLT<Mat> la(ca), lb(cb);
  const Vec diff = mb - ma;
  // KL(A||B) + KL(B||A); the log-determinant terms cancel.
  const double tr_ab = lb.solve(ca).trace();
  const double tr_ba = la.solve(cb).trace();
  const double maha_b = diff.dot(lb.solve(diff));
  const double maha_a = diff.dot(la.solve(diff));
  return 0.5 * (tr_ab + maha_b - 8.0) + 0.5 * (tr_ba + maha_a - 8.0);
}

struct RoundMetrics {
  int round_index = 0;
  std::string strategy;
  std::uint64_t seed = 0;
  /// Entropy of selected instance counts per class; NaN when nothing was selected.
  double count_entropy = std::numeric_limits<double>::quiet_NaN();
  /// Entropy of selected confidence sums per class; NaN when nothing was selected.
  double confidence_entropy = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> class_counts;
  std::vector<double> class_confidence;
  /// Per-class labeled/unlabeled divergence after this round's labels merge.
  std::vector<double> divergence;
  std::size_t frames_spent = 0;
  std::size_t instances_spent = 0;
};

struct SimulationResult {
  /// Per-class divergence before the first round.
  std::vector<double> initial_divergence;
  std::vector<RoundMetrics> rounds;
  std::vector<SelectionManifest> manifests;
  /// Set when the unlabeled pool ran out before all rounds completed.
  bool truncated = false;
};

/// Reduces every instance of the (filtered) pool once. The simulator's
/// features are frozen, so the labeled/unlabeled union never changes.
inline CoordinateCache reduce_pool(const FramePool& pool, const RoundConfig& config) {
  const FramePool filtered = filter_by_confidence(pool, config.confidence_threshold);
  TsneConfig tsne = config.tsne;
  tsne.seed = reduce_seed(config.seed);
  const auto keys = filtered.instance_keys();
  const auto result = with_stage("reduce", [&] { return tsne_reduce(embedding_matrix(filtered), tsne); });
  CoordinateCache cache;
  for (std::size_t i = 0; i < keys.size(); ++i) cache.emplace(keys[i], result.coords[i]);
  return cache;
}

namespace detail {

inline std::vector<double> class_divergence(const FramePool& pool, const std::vector<FusedFeature>& features) {
  const auto classes = static_cast<std::size_t>(pool.class_count());
  std::vector<std::vector<FusedFeature>> lab(classes), unl(classes);
  std::size_t row = 0;
  for (const auto& [id, records] : pool.frames()) {
    auto& side = pool.is_labeled(id) ? lab : unl;
    for (const auto& r : records) side[static_cast<std::size_t>(r.class_id)].push_back(features[row++]);
  }
  std::vector<double> out;
  for (std::size_t c = 0; c < classes; ++c) out.push_back(symmetric_gaussian_kl(lab[c], unl[c]));
  return out;
}

inline std::vector<FrameScore> baseline_scores(const FramePool& pool, const std::vector<FrameId>& candidates,
                                               Strategy strategy, Rng& rng) {
  std::vector<FrameScore> out;
  for (const auto& id : candidates) {
    FrameScore s;
    s.frame_id = id;
    const auto& records = pool.instances(id);
    s.instances = records.size();
    if (strategy == Strategy::random) {
      s.i_total = rng.uniform();
    } else {
      double sum = 0.0;
      for (const auto& r : records) sum += 1.0 - r.confidence;
      s.i_total = records.empty() ? 0.0 : sum / static_cast<double>(records.size());
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace detail

/// Runs `rounds` selection rounds with `strategy`, moving each round's
/// selection into the labeled set. No retraining happens: features and
/// confidences stay as generated.
inline SimulationResult run_rounds(const FramePool& initial, Strategy strategy, std::size_t rounds,
                                   const RoundConfig& config, const CoordinateCache* cache = nullptr) {
  config.validate();
  SimulationResult result;
  if (rounds == 0) return result;

  FramePool pool = filter_by_confidence(initial, config.confidence_threshold);
  CoordinateCache own;
  if (!cache) {
    own = reduce_pool(pool, config);
    cache = &own;
  }
  ReducedCoords coords;
  for (const auto& key : pool.instance_keys()) coords.push_back(cache->at(key));
  const auto features = fuse_features(coords, pool);
  result.initial_divergence = detail::class_divergence(pool, features);

  const auto classes = static_cast<std::size_t>(pool.class_count());
  for (std::size_t r = 0; r < rounds; ++r) {
    const auto candidates = stride_candidates(pool, config.candidate_stride);
    if (candidates.empty()) {
      result.truncated = true;
      break;
    }
    RoundConfig round_cfg = config;
    round_cfg.seed = substream_seed(config.seed, "round/" + std::to_string(r));

    SelectionManifest manifest;
    if (strategy == Strategy::ddfh) {
      manifest = run_selection(pool, round_cfg, cache);
    } else {
      Rng rng(round_cfg.seed, "baseline");
      manifest = select_topk(detail::baseline_scores(pool, candidates, strategy, rng), pool, round_cfg);
    }
    manifest.strategy = std::string(to_string(strategy));

    RoundMetrics m;
    m.round_index = static_cast<int>(r) + 1;
    m.strategy = manifest.strategy;
    m.seed = config.seed;
    m.class_counts.assign(classes, 0);
    m.class_confidence.assign(classes, 0.0);
    for (const auto& id : manifest.selected) {
      for (const auto& rec : pool.instances(id)) {
        ++m.class_counts[static_cast<std::size_t>(rec.class_id)];
        m.class_confidence[static_cast<std::size_t>(rec.class_id)] += rec.confidence;
      }
    }
    std::vector<double> counts(m.class_counts.begin(), m.class_counts.end());
    double selected_instances = 0.0;
    for (double c : counts) selected_instances += c;
    if (selected_instances > 0.0) {
      m.count_entropy = label_entropy(counts);
      double conf_total = 0.0;
      for (double c : m.class_confidence) conf_total += c;
      if (conf_total > 0.0) m.confidence_entropy = label_entropy(m.class_confidence);
    }
    m.frames_spent = manifest.frames_spent;
    m.instances_spent = manifest.instances_spent;

    pool = pool.with_labeled(manifest.selected);
    m.divergence = detail::class_divergence(pool, features);
    result.rounds.push_back(std::move(m));
    result.manifests.push_back(std::move(manifest));
  }
  return result;
}

/// round,strategy,seed,count_entropy,conf_entropy,divergence_c0..cK,spent
/// Round 0 carries the starting divergence; its entropies are nan.
inline void write_metrics_header(std::size_t classes, const std::string& hash, std::ostream& out) {
  out << csv_header_line(hash) << "round,strategy,seed,count_entropy,conf_entropy";
  for (std::size_t c = 0; c < classes; ++c) out << ",divergence_c" << c;
  out << ",spent\n";
}

inline void write_metrics_rows(const SimulationResult& result, std::string_view strategy, std::uint64_t seed,
                               std::ostream& out) {
  auto num = [](double v) { return std::isfinite(v) ? format_double(v) : std::string("nan"); };
  out << 0 << ',' << strategy << ',' << seed << ",nan,nan";
  for (double d : result.initial_divergence) out << ',' << num(d);
  out << ",0\n";
  for (const auto& m : result.rounds) {
    out << m.round_index << ',' << m.strategy << ',' << m.seed << ',' << num(m.count_entropy) << ','
        << num(m.confidence_entropy);
    for (double d : m.divergence) out << ',' << num(d);
    out << ',' << m.frames_spent << '\n';
  }
}

}  // namespace ddfh::harness
