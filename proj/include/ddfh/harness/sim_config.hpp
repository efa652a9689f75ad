#pragma once

#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ddfh/core/io.hpp"
#include "ddfh/harness/simulate.hpp"
#include "ddfh/harness/synth.hpp"
#include "ddfh/select/config.hpp"

namespace ddfh::harness {

/// Everything a `simulate` run needs: the pool generator, the per-round
/// selection settings, the strategies and the seeds.
struct SimulationConfig {
  SynthConfig synth;
  RoundConfig round;
  std::size_t rounds = 5;
  std::vector<Strategy> strategies = {Strategy::ddfh, Strategy::random};
  std::vector<std::uint64_t> seeds = {0};

  void validate() const {
    synth.validate();
    round.validate();
    if (strategies.empty()) throw ConfigError("sim.strategies must name at least one strategy");
    if (seeds.empty()) throw ConfigError("sim.seeds must list at least one seed");
  }
};

namespace detail {

inline std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss{std::string(text)};
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? std::string() : item.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace detail

/// Applies a `synth.*` or `sim.*` setting. Returns false for other keys.
inline bool apply_simulation_setting(SimulationConfig& cfg, std::string_view key, std::string_view value) {
  using ddfh::detail::parse_config_integer;
  using ddfh::detail::parse_config_real;
  auto& s = cfg.synth;
  if (key == "synth.class_ratios") {
    s.class_ratios.clear();
    for (const auto& item : detail::split_list(value)) s.class_ratios.push_back(parse_config_real(key, item));
  } else if (key == "synth.frames") s.frames = parse_config_integer<std::size_t>(key, value);
  else if (key == "synth.min_instances") s.min_instances = parse_config_integer<std::size_t>(key, value);
  else if (key == "synth.max_instances") s.max_instances = parse_config_integer<std::size_t>(key, value);
  else if (key == "synth.embedding_dim") s.embedding_dim = parse_config_integer<std::size_t>(key, value);
  else if (key == "synth.modes_per_class") s.modes_per_class = parse_config_integer<std::size_t>(key, value);
  else if (key == "synth.class_separation") s.class_separation = parse_config_real(key, value);
  else if (key == "synth.mode_spread") s.mode_spread = parse_config_real(key, value);
  else if (key == "synth.scene_spread") s.scene_spread = parse_config_real(key, value);
  else if (key == "synth.initial_labeled") s.initial_labeled = parse_config_integer<std::size_t>(key, value);
  else if (key == "synth.labeled_shift") s.labeled_shift = parse_config_real(key, value);
  else if (key == "sim.rounds") cfg.rounds = parse_config_integer<std::size_t>(key, value);
  else if (key == "sim.strategies") {
    cfg.strategies.clear();
    for (const auto& item : detail::split_list(value)) cfg.strategies.push_back(parse_strategy(item));
  } else if (key == "sim.seeds") {
    cfg.seeds.clear();
    for (const auto& item : detail::split_list(value)) cfg.seeds.push_back(parse_config_integer<std::uint64_t>(key, item));
  } else {
    return false;
  }
  return true;
}

inline ConfigEntries simulation_config_entries(const SimulationConfig& cfg) {
  auto join = [](const auto& items, auto fmt) {
    std::string out;
    for (const auto& it : items) {
      if (!out.empty()) out += ',';
      out += fmt(it);
    }
    return out;
  };
  const auto& s = cfg.synth;
  ConfigEntries e = round_config_entries(cfg.round);
  ConfigEntries extra = {
      {"sim.rounds", std::to_string(cfg.rounds)},
      {"sim.seeds", join(cfg.seeds, [](std::uint64_t v) { return std::to_string(v); })},
      {"sim.strategies", join(cfg.strategies, [](Strategy v) { return std::string(to_string(v)); })},
      {"synth.class_ratios", join(s.class_ratios, [](double v) { return format_double(v); })},
      {"synth.class_separation", format_double(s.class_separation)},
      {"synth.embedding_dim", std::to_string(s.embedding_dim)},
      {"synth.frames", std::to_string(s.frames)},
      {"synth.initial_labeled", std::to_string(s.initial_labeled)},
      {"synth.labeled_shift", format_double(s.labeled_shift)},
      {"synth.max_instances", std::to_string(s.max_instances)},
      {"synth.min_instances", std::to_string(s.min_instances)},
      {"synth.mode_spread", format_double(s.mode_spread)},
      {"synth.modes_per_class", std::to_string(s.modes_per_class)},
      {"synth.scene_spread", format_double(s.scene_spread)},
  };
  e.insert(e.end(), extra.begin(), extra.end());
  return e;
}

}  // namespace ddfh::harness
