#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ddfh/core/io.hpp"
#include "ddfh/density/gmm.hpp"
#include "ddfh/error.hpp"
#include "ddfh/reduce/tsne.hpp"
#include "ddfh/rng.hpp"

namespace ddfh {

enum class BudgetMode { frames, boxes };

inline std::string_view to_string(BudgetMode mode) { return mode == BudgetMode::frames ? "frames" : "boxes"; }

inline BudgetMode parse_budget_mode(std::string_view text) {
  if (text == "frames") return BudgetMode::frames;
  if (text == "boxes") return BudgetMode::boxes;
  throw ConfigError("budget mode must be 'frames' or 'boxes', got '" + std::string(text) + "'");
}

/// Settings of one selection round. The t-SNE and mixture seeds are not
/// read from the nested configs: every stage seed is derived from `seed`.
struct RoundConfig {
  BudgetMode budget_mode = BudgetMode::frames;
  std::size_t budget = 1;
  std::size_t candidate_stride = 1;
  double confidence_threshold = 0.1;
  std::uint64_t seed = 0;
  TsneConfig tsne;
  GmmOptions gmm;

  void validate() const {
    if (budget < 1) throw ConfigError("budget must be at least 1");
    if (candidate_stride < 1) throw ConfigError("candidate_stride must be at least 1");
    if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
      throw ConfigError("confidence_threshold must lie in [0, 1]");
    }
    tsne.validate();
    gmm.validate();
  }
};

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

namespace detail {

template <typename Int>
Int parse_config_integer(std::string_view key, std::string_view value) {
  Int v{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size() || value.empty()) {
    throw ConfigError("key '" + std::string(key) + "' expects an integer, got '" + std::string(value) + "'");
  }
  return v;
}

inline double parse_config_real(std::string_view key, std::string_view value) {
  try {
    const double v = parse_double(value, 0, key);
    if (!std::isfinite(v)) throw DataError("non-finite");
    return v;
  } catch (const DataError&) {
    throw ConfigError("key '" + std::string(key) + "' expects a number, got '" + std::string(value) + "'");
  }
}

}  // namespace detail

/// Applies one `key = value` setting. Returns false for keys that are not
/// round settings, so callers can route them elsewhere or reject them.
inline bool apply_round_setting(RoundConfig& cfg, std::string_view key, std::string_view value) {
  using detail::parse_config_integer;
  using detail::parse_config_real;
  if (key == "budget_mode") cfg.budget_mode = parse_budget_mode(value);
  else if (key == "budget") cfg.budget = parse_config_integer<std::size_t>(key, value);
  else if (key == "candidate_stride") cfg.candidate_stride = parse_config_integer<std::size_t>(key, value);
  else if (key == "confidence_threshold") cfg.confidence_threshold = parse_config_real(key, value);
  else if (key == "seed") cfg.seed = parse_config_integer<std::uint64_t>(key, value);
  else if (key == "tsne.perplexity") cfg.tsne.perplexity = parse_config_real(key, value);
  else if (key == "tsne.iterations") cfg.tsne.iterations = parse_config_integer<int>(key, value);
  else if (key == "tsne.learning_rate") cfg.tsne.learning_rate = parse_config_real(key, value);
  else if (key == "tsne.early_exaggeration") cfg.tsne.early_exaggeration = parse_config_real(key, value);
  else if (key == "tsne.exaggeration_iterations") cfg.tsne.exaggeration_iterations = parse_config_integer<int>(key, value);
  else if (key == "tsne.initial_momentum") cfg.tsne.initial_momentum = parse_config_real(key, value);
  else if (key == "tsne.final_momentum") cfg.tsne.final_momentum = parse_config_real(key, value);
  else if (key == "tsne.momentum_switch") cfg.tsne.momentum_switch = parse_config_integer<int>(key, value);
  else if (key == "tsne.init_scale") cfg.tsne.init_scale = parse_config_real(key, value);
  else if (key == "gmm.components") cfg.gmm.components = parse_config_integer<std::size_t>(key, value);
  else if (key == "gmm.reg_covar") cfg.gmm.reg_covar = parse_config_real(key, value);
  else if (key == "gmm.max_iter") cfg.gmm.max_iter = parse_config_integer<int>(key, value);
  else if (key == "gmm.tol") cfg.gmm.tol = parse_config_real(key, value);
  else return false;
  return true;
}

/// Canonical key/value echo of every round setting.
inline ConfigEntries round_config_entries(const RoundConfig& cfg) {
  return {
      {"budget_mode", std::string(to_string(cfg.budget_mode))},
      {"budget", std::to_string(cfg.budget)},
      {"candidate_stride", std::to_string(cfg.candidate_stride)},
      {"confidence_threshold", format_double(cfg.confidence_threshold)},
      {"seed", std::to_string(cfg.seed)},
      {"tsne.perplexity", format_double(cfg.tsne.perplexity)},
      {"tsne.iterations", std::to_string(cfg.tsne.iterations)},
      {"tsne.learning_rate", format_double(cfg.tsne.learning_rate)},
      {"tsne.early_exaggeration", format_double(cfg.tsne.early_exaggeration)},
      {"tsne.exaggeration_iterations", std::to_string(cfg.tsne.exaggeration_iterations)},
      {"tsne.initial_momentum", format_double(cfg.tsne.initial_momentum)},
      {"tsne.final_momentum", format_double(cfg.tsne.final_momentum)},
      {"tsne.momentum_switch", std::to_string(cfg.tsne.momentum_switch)},
      {"tsne.init_scale", format_double(cfg.tsne.init_scale)},
      {"gmm.components", std::to_string(cfg.gmm.components)},
      {"gmm.reg_covar", format_double(cfg.gmm.reg_covar)},
      {"gmm.max_iter", std::to_string(cfg.gmm.max_iter)},
      {"gmm.tol", format_double(cfg.gmm.tol)},
  };
}

/// 16 hex digits of FNV-1a over the canonical "key=value\n" lines.
inline std::string config_hash(const ConfigEntries& entries) {
  std::uint64_t h = fnv1a64("");
  for (const auto& [k, v] : entries) {
    h = fnv1a64(k, h);
    h = fnv1a64("=", h);
    h = fnv1a64(v, h);
    h = fnv1a64("\n", h);
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = hex[h & 0xF];
    h >>= 4;
  }
  return out;
}

}  // namespace ddfh
