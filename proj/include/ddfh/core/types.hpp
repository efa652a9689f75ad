#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ddfh/error.hpp"

namespace ddfh {

using FrameId = std::string;
using ClassId = int;

/// Number of fused feature dimensions: 2 reduced embedding + 6 geometric.
inline constexpr std::size_t kFeatureDim = 8;
inline constexpr std::size_t kReducedDim = 2;
inline constexpr std::size_t kGeometryDim = 6;

/// Box geometry reported by the detector.
struct GeometricFeatures {
  double length = 1.0;         // meters
  double width = 1.0;          // meters
  double height = 1.0;         // meters
  double volume = 1.0;         // cubic meters, taken as reported
  double rotation = 0.0;       // yaw, radians
  double point_density = 0.0;  // LiDAR points inside the box

  std::array<double, kGeometryDim> as_array() const {
    return {length, width, height, volume, rotation, point_density};
  }

  /// Empty string when valid, otherwise the first violated constraint.
  std::string violation() const {
    auto finite = [](double v) { return std::isfinite(v); };
    for (double v : as_array()) {
      if (!finite(v)) return "non-finite geometry value";
    }
    if (!(length > 0.0 && width > 0.0 && height > 0.0)) return "box dimensions must be positive";
    if (!(volume > 0.0)) return "volume must be positive";
    if (!(rotation >= -std::numbers::pi && rotation <= std::numbers::pi)) {
      return "rotation outside [-pi, pi]";
    }
    if (!(point_density >= 0.0)) return "point density must be nonnegative";
    return {};
  }

  friend bool operator==(const GeometricFeatures&, const GeometricFeatures&) = default;
};

/// One detected object.
struct InstanceRecord {
  FrameId frame_id;
  ClassId class_id = 0;
  double confidence = 0.0;
  std::vector<double> embedding;
  GeometricFeatures geometry;

  friend bool operator==(const InstanceRecord&, const InstanceRecord&) = default;
};

/// Position of an instance inside a pool: frame plus index within the frame.
struct InstanceKey {
  FrameId frame_id;
  std::size_t index = 0;

  friend auto operator<=>(const InstanceKey&, const InstanceKey&) = default;
  friend bool operator==(const InstanceKey&, const InstanceKey&) = default;
};

/// The 8-D feature consumed by every score: reduced embedding followed by
/// standardized geometry.
struct FusedFeature {
  std::array<double, kFeatureDim> values{};

  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }

  bool finite() const {
    for (double v : values) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const FusedFeature&, const FusedFeature&) = default;
};

/// Labeled/unlabeled frame pool. Immutable after construction; operations
/// that change membership return a new pool.
class FramePool {
 public:
  using FrameMap = std::map<FrameId, std::vector<InstanceRecord>>;

  FramePool() = default;

  /// Validates the pool invariants and throws DataError on violation.
  FramePool(FrameMap frames, std::set<FrameId> labeled, int class_count, int round_index = 0)
      : frames_(std::move(frames)),
        labeled_(std::move(labeled)),
        class_count_(class_count),
        round_index_(round_index) {
    if (class_count_ < 1) throw DataError("class count must be at least 1");
    if (round_index_ < 0) throw DataError("round index must be nonnegative");
    for (const auto& id : labeled_) {
      if (!frames_.contains(id)) throw DataError("labeled frame '" + id + "' is not in the pool");
    }
    std::size_t dim = 0;
    for (const auto& [id, records] : frames_) {
      for (const auto& r : records) {
        if (r.frame_id != id) throw DataError("record filed under the wrong frame '" + id + "'");
        if (r.class_id < 0 || r.class_id >= class_count_) {
          throw DataError("unknown class_id " + std::to_string(r.class_id) + " in frame '" + id + "'");
        }
        if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) {
          throw DataError("confidence outside [0, 1] in frame '" + id + "'");
        }
        if (dim == 0) dim = r.embedding.size();
        if (r.embedding.size() != dim) throw DataError("inconsistent embedding dimension");
        if (auto v = r.geometry.violation(); !v.empty()) throw DataError(v + " in frame '" + id + "'");
      }
    }
    embedding_dim_ = dim;
  }

  const FrameMap& frames() const noexcept { return frames_; }
  const std::set<FrameId>& labeled() const noexcept { return labeled_; }
  int class_count() const noexcept { return class_count_; }
  int round_index() const noexcept { return round_index_; }
  /// 0 for a pool without records.
  std::size_t embedding_dim() const noexcept { return embedding_dim_; }

  bool is_labeled(const FrameId& id) const { return labeled_.contains(id); }

  /// Unlabeled frame ids in ascending order.
  std::vector<FrameId> unlabeled() const {
    std::vector<FrameId> out;
    for (const auto& [id, records] : frames_) {
      if (!labeled_.contains(id)) out.push_back(id);
    }
    return out;
  }

  const std::vector<InstanceRecord>& instances(const FrameId& id) const {
    auto it = frames_.find(id);
    if (it == frames_.end()) throw DataError("unknown frame '" + id + "'");
    return it->second;
  }

  const InstanceRecord& at(const InstanceKey& key) const { return instances(key.frame_id).at(key.index); }

  std::size_t instance_count() const {
    std::size_t n = 0;
    for (const auto& [id, records] : frames_) n += records.size();
    return n;
  }

  /// Every instance in canonical order: frames ascending, then record order.
  std::vector<InstanceKey> instance_keys() const {
    std::vector<InstanceKey> keys;
    for (const auto& [id, records] : frames_) {
      for (std::size_t i = 0; i < records.size(); ++i) keys.push_back({id, i});
    }
    return keys;
  }

  /// Sub-pool with the given frames (labels restricted accordingly).
  FramePool restricted_to(const std::set<FrameId>& ids) const {
    FrameMap frames;
    std::set<FrameId> labeled;
    for (const auto& id : ids) {
      frames.emplace(id, instances(id));
      if (labeled_.contains(id)) labeled.insert(id);
    }
    return FramePool(std::move(frames), std::move(labeled), class_count_, round_index_);
  }

  /// Pool with `ids` moved to the labeled set and the round advanced.
  FramePool with_labeled(const std::vector<FrameId>& ids) const {
    std::set<FrameId> labeled = labeled_;
    for (const auto& id : ids) {
      if (!frames_.contains(id)) throw DataError("cannot label unknown frame '" + id + "'");
      labeled.insert(id);
    }
    return FramePool(frames_, std::move(labeled), class_count_, round_index_ + 1);
  }

  friend bool operator==(const FramePool&, const FramePool&) = default;

 private:
  FrameMap frames_;
  std::set<FrameId> labeled_;
  int class_count_ = 1;
  int round_index_ = 0;
  std::size_t embedding_dim_ = 0;
};

/// Copy of `pool` keeping only instances with confidence >= threshold.
/// Frames left without instances stay in the pool.
inline FramePool filter_by_confidence(const FramePool& pool, double threshold) {
  FramePool::FrameMap frames;
  for (const auto& [id, records] : pool.frames()) {
    auto& kept = frames[id];
    for (const auto& r : records) {
      if (r.confidence >= threshold) kept.push_back(r);
    }
  }
  return FramePool(std::move(frames), pool.labeled(), pool.class_count(), pool.round_index());
}

}  // namespace ddfh
