#pragma once

#include <algorithm>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddfh/core/io.hpp"
#include "ddfh/core/types.hpp"
#include "ddfh/error.hpp"
#include "ddfh/select/config.hpp"
#include "ddfh/select/pipeline.hpp"
#include "ddfh/version.hpp"

namespace ddfh {

struct SelectionManifest {
  int round_index = 0;
  std::string strategy = "ddfh";
  std::vector<FrameId> selected;
  /// Every candidate, best first.
  std::vector<FrameScore> ranking;
  BudgetMode budget_mode = BudgetMode::frames;
  std::size_t budget = 0;
  std::size_t frames_spent = 0;
  std::size_t instances_spent = 0;
  ConfigEntries config;
  std::string config_hash;
  std::string engine_version = std::string(kEngineVersion);
};

/// Ranking order: higher i_total, then higher i_cb, then smaller frame id.
inline bool ranks_before(const FrameScore& a, const FrameScore& b) {
  if (a.i_total != b.i_total) return a.i_total > b.i_total;
  if (a.i_cb != b.i_cb) return a.i_cb > b.i_cb;
  return a.frame_id < b.frame_id;
}

/// Ranks the scored candidates and cuts the ranking at the budget. In box
/// mode frames are taken first-fit down the ranking, skipping any frame
/// that would overflow the box budget; the top frame is always taken.
inline SelectionManifest select_topk(std::vector<FrameScore> scores, const FramePool& pool, const RoundConfig& config) {
  if (scores.empty()) throw DataError("nothing to select from");
  config.validate();
  std::sort(scores.begin(), scores.end(), ranks_before);
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i].frame_id == scores[i - 1].frame_id) throw InvariantError("frame scored twice");
  }

  SelectionManifest m;
  m.round_index = pool.round_index();
  m.budget_mode = config.budget_mode;
  m.budget = config.budget;
  m.config = round_config_entries(config);
  m.config_hash = config_hash(m.config);

  for (const auto& s : scores) {
    if (pool.is_labeled(s.frame_id)) throw InvariantError("labeled frame '" + s.frame_id + "' among candidates");
    const std::size_t boxes = pool.instances(s.frame_id).size();
    if (config.budget_mode == BudgetMode::frames) {
      if (m.selected.size() >= config.budget) break;
    } else if (!m.selected.empty() && m.instances_spent + boxes > config.budget) {
      continue;
    }
    m.selected.push_back(s.frame_id);
    m.instances_spent += boxes;
  }
  m.frames_spent = m.selected.size();
  m.ranking = std::move(scores);
  return m;
}

/// Scores the pool and selects in one call.
inline SelectionManifest run_selection(const FramePool& pool, const RoundConfig& config,
                                       const CoordinateCache* cache = nullptr, PoolScoring* scoring_out = nullptr) {
  auto scoring = score_pool(pool, config, cache);
  const FramePool filtered = filter_by_confidence(pool, config.confidence_threshold);
  auto manifest = select_topk(scoring.frames, filtered, config);
  if (scoring_out) *scoring_out = std::move(scoring);
  return manifest;
}

inline nlohmann::ordered_json frame_score_json(const FrameScore& s) {
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (const auto& c : s.classes) {
    nlohmann::ordered_json cj{{"class_id", c.class_id}, {"instances", c.instances}, {"confidence_sum", c.confidence_sum}};
    if (c.heterogeneity) {
      cj["s_var"] = c.heterogeneity->s_var;
      cj["s_cor"] = c.heterogeneity->s_cor;
    } else {
      cj["s_var"] = nullptr;
      cj["s_cor"] = nullptr;
    }
    classes.push_back(std::move(cj));
  }
  return {{"frame_id", s.frame_id}, {"i_dd", s.i_dd},           {"i_fh", s.i_fh},         {"i_cb", s.i_cb},
          {"i_total", s.i_total},   {"instances", s.instances}, {"classes", std::move(classes)}};
}

inline nlohmann::ordered_json config_json(const ConfigEntries& entries) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : entries) j[k] = v;
  return j;
}

inline nlohmann::ordered_json manifest_json(const SelectionManifest& m) {
  nlohmann::ordered_json ranking = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < m.ranking.size(); ++i) {
    auto j = frame_score_json(m.ranking[i]);
    j["rank"] = i + 1;
    ranking.push_back(std::move(j));
  }
  return {{"engine", std::string(kEngineName)},
          {"engine_version", m.engine_version},
          {"config_hash", m.config_hash},
          {"round_index", m.round_index},
          {"strategy", m.strategy},
          {"selected", m.selected},
          {"budget",
           {{"mode", std::string(to_string(m.budget_mode))},
            {"limit", m.budget},
            {"frames_spent", m.frames_spent},
            {"instances_spent", m.instances_spent}}},
          {"config", config_json(m.config)},
          {"ranking", std::move(ranking)}};
}

inline void write_manifest(const SelectionManifest& m, std::ostream& out) { out << manifest_json(m).dump(2) << '\n'; }

/// `# ddfh <version> config_hash=<hash>` comment line heading every CSV.
inline std::string csv_header_line(const std::string& hash) {
  return "# " + std::string(kEngineName) + " " + std::string(kEngineVersion) + " config_hash=" + hash + "\n";
}

/// frame_id,i_dd,i_fh,i_cb,i_total in the given order.
inline void write_score_csv(const std::vector<FrameScore>& scores, const std::string& hash, std::ostream& out) {
  out << csv_header_line(hash) << "frame_id,i_dd,i_fh,i_cb,i_total\n";
  for (const auto& s : scores) {
    out << s.frame_id << ',' << format_double(s.i_dd) << ',' << format_double(s.i_fh) << ',' << format_double(s.i_cb)
        << ',' << format_double(s.i_total) << '\n';
  }
}

}  // namespace ddfh
