#pragma once

// One acquisition round: reduce -> fuse -> per-class densities -> raw
// instance scores -> quantile-normalized frame indicators.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ddfh/core/fuse.hpp"
#include "ddfh/core/types.hpp"
#include "ddfh/density/gmm.hpp"
#include "ddfh/error.hpp"
#include "ddfh/reduce/tsne.hpp"
#include "ddfh/rng.hpp"
#include "ddfh/scoring/indicators.hpp"
#include "ddfh/scoring/quantile.hpp"
#include "ddfh/select/config.hpp"

namespace ddfh {

/// Reduced coordinates computed earlier for the same instances, keyed by
/// their position in the confidence-filtered pool.
using CoordinateCache = std::map<InstanceKey, std::array<double, kReducedDim>>;

struct ClassDiagnostics {
  ClassId class_id = 0;
  std::size_t instances = 0;
  double confidence_sum = 0.0;
  /// Absent when the class is missing from the frame or the joined
  /// frame/labeled set has fewer than 2 instances.
  std::optional<HeterogeneityScores> heterogeneity;
};

struct FrameScore {
  FrameId frame_id;
  double i_dd = 0.0;
  double i_fh = 0.0;
  double i_cb = 0.0;
  double i_total = 0.0;
  std::size_t instances = 0;
  std::vector<ClassDiagnostics> classes;
};

/// Fused features of the round's working set (labeled frames plus the
/// strided unlabeled candidates, after the confidence filter).
struct RoundFeatures {
  FramePool pool;
  std::vector<FrameId> candidates;
  std::vector<InstanceKey> keys;
  std::vector<FusedFeature> features;
  /// First feature row of every frame; a frame's rows are contiguous.
  std::map<FrameId, std::size_t> frame_offset;
  std::optional<TsneDiagnostics> tsne;

  std::span<const FusedFeature> frame_features(const FrameId& id) const {
    return std::span<const FusedFeature>(features).subspan(frame_offset.at(id), pool.instances(id).size());
  }
};

struct ClassDensities {
  std::vector<GmmModel> labeled;
  std::vector<GmmModel> unlabeled;
  std::vector<std::string> warnings;
};

/// Raw scores of every candidate instance, in candidate/key order.
struct CandidateScores {
  std::vector<InstanceKey> keys;
  std::vector<InstanceScores> scores;
};

struct ScoringDiagnostics {
  std::optional<TsneDiagnostics> tsne;
  std::vector<double> s_dd;
  std::vector<double> s_nov;
  std::vector<double> s_var;
  std::vector<double> s_cor;
  std::size_t skipped_heterogeneity = 0;
  std::vector<std::string> warnings;
};

struct PoolScoring {
  std::vector<FrameScore> frames;
  ScoringDiagnostics diagnostics;
};

/// Unlabeled frames of `pool` kept by the stride: every stride-th frame in
/// ascending id order, starting with the first.
inline std::vector<FrameId> stride_candidates(const FramePool& pool, std::size_t stride) {
  if (stride < 1) throw ConfigError("candidate_stride must be at least 1");
  const auto unlabeled = pool.unlabeled();
  std::vector<FrameId> out;
  for (std::size_t i = 0; i < unlabeled.size(); i += stride) out.push_back(unlabeled[i]);
  return out;
}

/// Seeds of the per-stage substreams.
inline std::uint64_t reduce_seed(std::uint64_t seed) { return substream_seed(seed, "reduce"); }

inline std::uint64_t density_seed(std::uint64_t seed, bool labeled, ClassId c) {
  return substream_seed(seed, std::string(labeled ? "density/labeled/" : "density/unlabeled/") + std::to_string(c));
}

/// Filters, restricts to labeled + candidates, reduces (or reuses
/// `cache`) and fuses with union-pool standardization.
inline RoundFeatures prepare_round(const FramePool& pool, const RoundConfig& config,
                                   const CoordinateCache* cache = nullptr) {
  config.validate();
  RoundFeatures rf;
  const FramePool filtered = filter_by_confidence(pool, config.confidence_threshold);
  rf.candidates = stride_candidates(filtered, config.candidate_stride);
  if (rf.candidates.empty()) throw DataError("no unlabeled candidates");

  std::set<FrameId> working(filtered.labeled().begin(), filtered.labeled().end());
  working.insert(rf.candidates.begin(), rf.candidates.end());
  rf.pool = filtered.restricted_to(working);
  rf.keys = rf.pool.instance_keys();
  {
    std::size_t offset = 0;
    for (const auto& [id, records] : rf.pool.frames()) {
      rf.frame_offset[id] = offset;
      offset += records.size();
    }
  }

  ReducedCoords reduced;
  if (cache) {
    reduced.reserve(rf.keys.size());
    for (const auto& key : rf.keys) {
      auto it = cache->find(key);
      if (it == cache->end()) {
        throw DataError("coordinate cache has no entry for frame '" + key.frame_id + "' instance " +
                        std::to_string(key.index));
      }
      reduced.push_back(it->second);
    }
  } else {
    TsneConfig tsne = config.tsne;
    tsne.seed = reduce_seed(config.seed);
    auto result = with_stage("reduce", [&] { return tsne_reduce(embedding_matrix(rf.pool), tsne); });
    reduced = std::move(result.coords);
    rf.tsne = std::move(result.diagnostics);
  }
  rf.features = with_stage("fuse", [&] { return fuse_features(reduced, rf.pool); });
  return rf;
}

/// Per-class mixtures on labeled and on candidate instances.
inline ClassDensities fit_densities(const RoundFeatures& rf, const RoundConfig& config) {
  const int classes = rf.pool.class_count();
  std::vector<PointSet<8>> labeled(static_cast<std::size_t>(classes));
  std::vector<PointSet<8>> unlabeled(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < rf.keys.size(); ++i) {
    const auto& rec = rf.pool.at(rf.keys[i]);
    auto& bucket = rf.pool.is_labeled(rf.keys[i].frame_id) ? labeled : unlabeled;
    bucket[static_cast<std::size_t>(rec.class_id)].push_back(to_vector(rf.features[i]));
  }

  ClassDensities out;
  return with_stage("density", [&] {
    for (int c = 0; c < classes; ++c) {
      for (bool is_labeled : {true, false}) {
        GmmOptions opts = config.gmm;
        opts.seed = density_seed(config.seed, is_labeled, c);
        const auto& points = (is_labeled ? labeled : unlabeled)[static_cast<std::size_t>(c)];
        auto fit = fit_class_density<8>(std::span<const FeatureVector>(points), opts);
        for (const auto& w : fit.warnings) {
          out.warnings.push_back(std::string(is_labeled ? "labeled" : "unlabeled") + " class " + std::to_string(c) +
                                 ": " + w);
        }
        (is_labeled ? out.labeled : out.unlabeled).push_back(std::move(fit.model));
      }
    }
    return out;
  });
}

/// s_dd and s_nov of every candidate instance.
inline CandidateScores instance_scores(const RoundFeatures& rf, const ClassDensities& densities) {
  CandidateScores out;
  for (const auto& id : rf.candidates) {
    const auto features = rf.frame_features(id);
    const auto& records = rf.pool.instances(id);
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto c = static_cast<std::size_t>(records[i].class_id);
      out.keys.push_back({id, i});
      out.scores.push_back({dd_score(densities.unlabeled[c], densities.labeled[c], features[i]),
                            nov_score(densities.labeled[c], features[i])});
    }
  }
  return out;
}

/// Quantile-normalizes the raw scores and assembles every candidate's
/// I_dd, I_fh, I_cb and I_total.
inline PoolScoring aggregate_frames(const RoundFeatures& rf, const CandidateScores& raw) {
  const int classes = rf.pool.class_count();
  const auto class_index = [](ClassId c) { return static_cast<std::size_t>(c); };
  PoolScoring out;
  auto& diag = out.diagnostics;
  diag.tsne = rf.tsne;

  for (const auto& s : raw.scores) {
    diag.s_dd.push_back(s.s_dd);
    diag.s_nov.push_back(s.s_nov);
  }

  // Labeled features grouped by class.
  std::vector<std::vector<FusedFeature>> labeled(class_index(classes));
  for (const auto& id : rf.pool.labeled()) {
    const auto features = rf.frame_features(id);
    const auto& records = rf.pool.instances(id);
    for (std::size_t i = 0; i < records.size(); ++i) labeled[class_index(records[i].class_id)].push_back(features[i]);
  }
  std::vector<FeatureMatrix> labeled_matrix;
  for (const auto& cols : labeled) labeled_matrix.push_back(feature_matrix(cols));

  // Per-frame class diagnostics and heterogeneity.
  std::vector<FrameScore> frames;
  for (const auto& id : rf.candidates) {
    FrameScore fs;
    fs.frame_id = id;
    const auto& records = rf.pool.instances(id);
    const auto features = rf.frame_features(id);
    fs.instances = records.size();
    fs.classes.resize(class_index(classes));
    std::vector<std::vector<FusedFeature>> per_class(class_index(classes));
    for (int c = 0; c < classes; ++c) fs.classes[class_index(c)].class_id = c;
    for (std::size_t i = 0; i < records.size(); ++i) {
      auto& cd = fs.classes[class_index(records[i].class_id)];
      ++cd.instances;
      cd.confidence_sum += records[i].confidence;
      per_class[class_index(records[i].class_id)].push_back(features[i]);
    }
    for (int c = 0; c < classes; ++c) {
      auto& cd = fs.classes[class_index(c)];
      if (cd.instances == 0) continue;
      const auto& lab = labeled_matrix[class_index(c)];
      if (cd.instances + static_cast<std::size_t>(lab.cols()) < 2) {
        ++diag.skipped_heterogeneity;
        continue;
      }
      cd.heterogeneity = heterogeneity_scores(feature_matrix(per_class[class_index(c)]), lab);
      diag.s_var.push_back(cd.heterogeneity->s_var);
      diag.s_cor.push_back(cd.heterogeneity->s_cor);
    }
    frames.push_back(std::move(fs));
  }

  std::optional<QuantileMap> dd_map, nov_map, var_map, cor_map;
  if (!diag.s_dd.empty()) {
    dd_map = QuantileMap::fit(diag.s_dd);
    nov_map = QuantileMap::fit(diag.s_nov);
  }
  if (!diag.s_var.empty()) {
    var_map = QuantileMap::fit(diag.s_var);
    cor_map = QuantileMap::fit(diag.s_cor);
  }

  std::size_t cursor = 0;
  for (auto& fs : frames) {
    const std::span<const InstanceScores> inst(raw.scores.data() + cursor, fs.instances);
    cursor += fs.instances;
    fs.i_dd = dd_map ? frame_i_dd(inst, *dd_map, *nov_map) : 0.0;

    std::vector<HeterogeneityScores> present;
    std::vector<double> sums;
    for (const auto& cd : fs.classes) {
      if (cd.heterogeneity) present.push_back(*cd.heterogeneity);
      sums.push_back(cd.confidence_sum);
    }
    fs.i_fh = var_map ? frame_i_fh(present, *var_map, *cor_map, classes) : 0.0;
    fs.i_cb = frame_i_cb(sums);
    fs.i_total = frame_i_total(fs.i_dd, fs.i_fh, fs.i_cb);
  }
  if (cursor != raw.scores.size()) throw InvariantError("candidate score count does not match candidate instances");
  if (diag.skipped_heterogeneity > 0) {
    diag.warnings.push_back(std::to_string(diag.skipped_heterogeneity) +
                            " (frame, class) pair(s) had fewer than 2 joined instances; heterogeneity skipped");
  }
  out.frames = std::move(frames);
  return out;
}

/// Full scoring of every unlabeled candidate frame.
inline PoolScoring score_pool(const FramePool& pool, const RoundConfig& config,
                              const CoordinateCache* cache = nullptr) {
  const auto rf = prepare_round(pool, config, cache);
  const auto densities = fit_densities(rf, config);
  const auto raw = with_stage("score", [&] { return instance_scores(rf, densities); });
  auto scoring = with_stage("score", [&] { return aggregate_frames(rf, raw); });
  scoring.diagnostics.warnings.insert(scoring.diagnostics.warnings.begin(), densities.warnings.begin(),
                                      densities.warnings.end());
  if (rf.tsne) {
    for (const auto& w : rf.tsne->warnings) scoring.diagnostics.warnings.insert(scoring.diagnostics.warnings.begin(), w);
  }
  return scoring;
}

}  // namespace ddfh
