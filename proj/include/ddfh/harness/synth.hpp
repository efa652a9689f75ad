#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "ddfh/core/types.hpp"
#include "ddfh/error.hpp"
#include "ddfh/rng.hpp"

namespace ddfh::harness {

/// Synthetic detection pool. Every class is a mixture of Gaussian modes in
/// embedding space with class-typical box sizes; confidences fall with the
/// distance of an instance from its mode and are lower for rarer classes.
struct SynthConfig {
  /// Instance class frequencies; must sum to 1.
  std::vector<double> class_ratios = {0.8, 0.1, 0.1};
  std::size_t frames = 200;
  std::size_t min_instances = 1;
  std::size_t max_instances = 3;
  std::size_t embedding_dim = 16;
  std::size_t modes_per_class = 2;
  /// Scale of class-centroid placement in embedding space.
  double class_separation = 6.0;
  /// Scale of mode placement around the class centroid.
  double mode_spread = 2.0;
  /// Stddev of the per-frame offset shared by all instances of a frame.
  double scene_spread = 0.5;
  /// Frames marked labeled at generation.
  std::size_t initial_labeled = 20;
  /// Shift applied to the initial labeled frames' feature distribution:
  /// embeddings move along a fixed per-class direction and boxes are
  /// observed from closer range. 0 draws labeled and unlabeled alike.
  double labeled_shift = 0.0;
  std::uint64_t seed = 0;

  int class_count() const { return static_cast<int>(class_ratios.size()); }

  void validate() const {
    if (class_ratios.empty()) throw ConfigError("synthetic pool needs at least one class");
    double total = 0.0;
    for (double r : class_ratios) {
      if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("class ratios must be nonnegative");
      total += r;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("class ratios must sum to 1");
    if (frames < 1) throw ConfigError("synthetic pool needs at least one frame");
    if (min_instances > max_instances) throw ConfigError("min_instances exceeds max_instances");
    if (embedding_dim < 2) throw ConfigError("embedding dimension must be at least 2");
    if (modes_per_class < 1) throw ConfigError("modes_per_class must be at least 1");
    if (initial_labeled > frames) throw ConfigError("initial_labeled exceeds frames");
    if (!(class_separation >= 0.0 && mode_spread >= 0.0 && scene_spread >= 0.0)) {
      throw ConfigError("spreads must be nonnegative");
    }
    if (!std::isfinite(labeled_shift)) throw ConfigError("labeled_shift must be finite");
  }
};

/// Zero-padded so that lexicographic order matches generation order.
inline FrameId synth_frame_id(std::size_t index) {
  std::string digits = std::to_string(index);
  return "f" + std::string(digits.size() < 6 ? 6 - digits.size() : 0, '0') + digits;
}

inline FramePool synth_generate(const SynthConfig& config) {
  config.validate();
  const int classes = config.class_count();
  const std::size_t dim = config.embedding_dim;
  Rng rng(config.seed, "synth");

  static constexpr std::array<std::array<double, 3>, 3> kPresetSizes = {{
      {3.9, 1.6, 1.56},  // car
      {0.8, 0.6, 1.73},  // pedestrian
      {1.76, 0.6, 1.73}  // cyclist
  }};

  struct ClassModel {
    std::vector<std::vector<double>> modes;
    std::vector<double> shift_direction;
    std::array<double, 3> size{};
    double confidence_bias = 0.0;
  };
  const double max_ratio = *std::max_element(config.class_ratios.begin(), config.class_ratios.end());
  std::vector<ClassModel> models(static_cast<std::size_t>(classes));
  for (int c = 0; c < classes; ++c) {
    auto& m = models[static_cast<std::size_t>(c)];
    std::vector<double> centroid(dim);
    for (auto& v : centroid) v = rng.normal(0.0, config.class_separation);
    for (std::size_t k = 0; k < config.modes_per_class; ++k) {
      std::vector<double> mode(dim);
      for (std::size_t d = 0; d < dim; ++d) mode[d] = centroid[d] + rng.normal(0.0, config.mode_spread);
      m.modes.push_back(std::move(mode));
    }
    m.shift_direction.resize(dim);
    double norm = 0.0;
    for (auto& v : m.shift_direction) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : m.shift_direction) v /= norm;
    if (static_cast<std::size_t>(c) < kPresetSizes.size()) {
      m.size = kPresetSizes[static_cast<std::size_t>(c)];
    } else {
      m.size = {rng.uniform(0.5, 5.0), rng.uniform(0.4, 2.5), rng.uniform(0.8, 3.0)};
    }
    const double ratio = max_ratio > 0.0 ? config.class_ratios[static_cast<std::size_t>(c)] / max_ratio : 1.0;
    m.confidence_bias = 1.0 + 2.0 * ratio;
  }

  // Initial labeled frames: a seeded partial shuffle.
  std::vector<std::size_t> order(config.frames);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i < config.initial_labeled; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
    std::swap(order[i], order[j]);
  }
  std::set<std::size_t> labeled_index(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(config.initial_labeled));

  // Cumulative class distribution.
  std::vector<double> cumulative;
  double acc = 0.0;
  for (double r : config.class_ratios) cumulative.push_back(acc += r);

  FramePool::FrameMap frames;
  std::set<FrameId> labeled;
  const std::size_t span = config.max_instances - config.min_instances + 1;
  for (std::size_t f = 0; f < config.frames; ++f) {
    const FrameId id = synth_frame_id(f);
    const bool is_labeled = labeled_index.contains(f);
    if (is_labeled) labeled.insert(id);
    const double shift = is_labeled ? config.labeled_shift : 0.0;

    std::vector<double> scene(dim);
    for (auto& v : scene) v = rng.normal(0.0, config.scene_spread);
    const std::size_t count = config.min_instances + static_cast<std::size_t>(rng.below(span));

    auto& records = frames[id];
    for (std::size_t i = 0; i < count; ++i) {
      const double u = rng.uniform();
      int cls = 0;
      while (cls + 1 < classes && u >= cumulative[static_cast<std::size_t>(cls)]) ++cls;
      const auto& model = models[static_cast<std::size_t>(cls)];
      const auto& mode = model.modes[static_cast<std::size_t>(rng.below(model.modes.size()))];

      InstanceRecord r;
      r.frame_id = id;
      r.class_id = cls;
      r.embedding.resize(dim);
      double sq = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double noise = rng.normal();
        sq += noise * noise;
        r.embedding[d] = mode[d] + scene[d] + noise + shift * model.shift_direction[d];
      }

      auto jitter = [&](double base) { return base * std::exp(rng.normal(0.0, 0.08)); };
      auto& g = r.geometry;
      g.length = jitter(model.size[0]);
      g.width = jitter(model.size[1]);
      g.height = jitter(model.size[2]);
      g.volume = g.length * g.width * g.height;
      g.rotation = rng.uniform(-std::numbers::pi, std::numbers::pi);
      const double far = shift != 0.0 ? std::max(8.0, 60.0 / (1.0 + std::abs(shift))) : 60.0;
      const double range = rng.uniform(5.0, far);
      g.point_density = std::floor(4000.0 * g.volume / (range * range) * std::exp(rng.normal(0.0, 0.3)));

      // Confidence falls with the distance from the mode (in units of the
      // noise radius) and is lower for rare classes.
      const double radius = std::sqrt(sq / static_cast<double>(dim));
      const double logit = model.confidence_bias - 2.0 * (radius - 1.0) + rng.normal(0.0, 0.3);
      r.confidence = std::clamp(1.0 / (1.0 + std::exp(-logit)), 0.0, 1.0);
      records.push_back(std::move(r));
    }
  }
  return FramePool(std::move(frames), std::move(labeled), classes);
}

}  // namespace ddfh::harness
