// ddfh: frame selection for active learning on multi-instance detections.
//
//   ddfh reduce   --input FILE --out DIR [--config FILE] [--seed N]
//   ddfh score    --input FILE --labels FILE --out DIR [--config FILE] ...
//   ddfh select   --input FILE --labels FILE --out DIR [--config FILE] ...
//   ddfh simulate --config FILE --out DIR [--strategy S] [--seed N] ...
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 internal invariant violation.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ddfh/cli/config_file.hpp"
#include "ddfh/core/io.hpp"
#include "ddfh/ddfh.hpp"
#include "ddfh/harness/sim_config.hpp"
#include "ddfh/harness/simulate.hpp"
#include "ddfh/harness/synth.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

struct Options {
  std::string input;
  std::string labels;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string strategy;
  std::optional<std::size_t> budget;
  std::string budget_mode;
  std::optional<std::size_t> stride;
  std::optional<double> threshold;
  bool verbose = false;
};

struct Settings {
  ddfh::harness::SimulationConfig sim;
  std::optional<int> classes;
};

void log(const Options& opt, const std::string& msg) {
  if (opt.verbose) std::cerr << "ddfh: " << msg << '\n';
}

std::ifstream open_input(const std::string& path, const char* what) {
  if (path.empty()) throw ddfh::ConfigError(std::string("missing --") + what);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ddfh::DataError("cannot open " + std::string(what) + " file '" + path + "'");
  return in;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ddfh::DataError("cannot write '" + path.string() + "'");
  return out;
}

fs::path output_dir(const Options& opt) {
  if (opt.out.empty()) throw ddfh::ConfigError("missing --out");
  std::error_code ec;
  fs::create_directories(opt.out, ec);
  if (ec) throw ddfh::DataError("cannot create output directory '" + opt.out + "': " + ec.message());
  return fs::path(opt.out);
}

/// Defaults, then the config file, then command-line overrides.
Settings load_settings(const Options& opt, bool simulation) {
  Settings s;
  if (!opt.config.empty()) {
    auto in = open_input(opt.config, "config");
    for (const auto& line : ddfh::cli::parse_config_file(in)) {
      const auto where = "config line " + std::to_string(line.line) + ": ";
      try {
        if (ddfh::apply_round_setting(s.sim.round, line.key, line.value)) continue;
        if (line.key == "classes") {
          s.classes = ddfh::detail::parse_config_integer<int>(line.key, line.value);
          continue;
        }
        if (simulation && ddfh::harness::apply_simulation_setting(s.sim, line.key, line.value)) continue;
      } catch (const ddfh::ConfigError& e) {
        throw ddfh::ConfigError(where + e.what());
      }
      throw ddfh::ConfigError(where + "unknown key '" + line.key + "'");
    }
  }
  auto& r = s.sim.round;
  if (opt.seed) {
    r.seed = *opt.seed;
    s.sim.seeds = {*opt.seed};
  }
  if (opt.budget) r.budget = *opt.budget;
  if (!opt.budget_mode.empty()) r.budget_mode = ddfh::parse_budget_mode(opt.budget_mode);
  if (opt.stride) r.candidate_stride = *opt.stride;
  if (opt.threshold) r.confidence_threshold = *opt.threshold;
  if (!opt.strategy.empty()) {
    if (!simulation) throw ddfh::ConfigError("--strategy applies to simulate only");
    s.sim.strategies = {ddfh::harness::parse_strategy(opt.strategy)};
  }
  if (s.classes && *s.classes < 1) throw ddfh::ConfigError("classes must be at least 1");
  if (simulation) s.sim.validate();
  else r.validate();
  return s;
}

ddfh::FramePool load_pool(const Options& opt, const Settings& s, bool need_labels) {
  std::set<ddfh::FrameId> labeled;
  if (need_labels || !opt.labels.empty()) {
    auto lin = open_input(opt.labels, "labels");
    labeled = ddfh::parse_labels(lin);
  }
  auto in = open_input(opt.input, "input");
  const auto format = fs::path(opt.input).extension() == ".csv" ? ddfh::InstanceFormat::csv : ddfh::InstanceFormat::jsonl;
  try {
    return ddfh::parse_instances(in, format, labeled, s.classes);
  } catch (const ddfh::DataError& e) {
    throw ddfh::DataError(opt.input + ": " + e.what());
  }
}

ddfh::ConfigEntries echo(const Settings& s) {
  auto entries = ddfh::round_config_entries(s.sim.round);
  if (s.classes) entries.emplace_back("classes", std::to_string(*s.classes));
  return entries;
}

nlohmann::ordered_json tsne_json(const ddfh::TsneDiagnostics& d) {
  return {{"initial_kl", d.initial_kl},
          {"final_kl", d.final_kl},
          {"requested_perplexity", d.requested_perplexity},
          {"effective_perplexity", d.effective_perplexity},
          {"perplexity_clamped", d.perplexity_clamped},
          {"degenerate_rows", d.degenerate_rows},
          {"iterations", d.iterations},
          {"seed", d.seed},
          {"warnings", d.warnings}};
}

int run_reduce(const Options& opt) {
  const auto s = load_settings(opt, false);
  const auto pool = load_pool(opt, s, false);
  const auto dir = output_dir(opt);
  const auto entries = echo(s);
  const auto hash = ddfh::config_hash(entries);

  ddfh::TsneConfig tsne = s.sim.round.tsne;
  tsne.seed = ddfh::reduce_seed(s.sim.round.seed);
  log(opt, "reducing " + std::to_string(pool.instance_count()) + " instances");
  const auto result = ddfh::with_stage("reduce", [&] { return ddfh::tsne_reduce(ddfh::embedding_matrix(pool), tsne); });

  auto csv = open_output(dir / "coords.csv");
  csv << ddfh::csv_header_line(hash) << "frame_id,instance,x,y\n";
  const auto keys = pool.instance_keys();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    csv << keys[i].frame_id << ',' << keys[i].index << ',' << ddfh::format_double(result.coords[i][0]) << ','
        << ddfh::format_double(result.coords[i][1]) << '\n';
  }
  nlohmann::ordered_json diag{{"engine", std::string(ddfh::kEngineName)},
                              {"engine_version", std::string(ddfh::kEngineVersion)},
                              {"config_hash", hash},
                              {"config", ddfh::config_json(entries)}};
  diag.update(tsne_json(result.diagnostics));
  auto js = open_output(dir / "reduce_diagnostics.json");
  js << diag.dump(2) << '\n';
  for (const auto& w : result.diagnostics.warnings) log(opt, "warning: " + w);
  return kExitOk;
}

nlohmann::ordered_json scoring_json(const ddfh::PoolScoring& scoring, const std::string& hash,
                                    const ddfh::ConfigEntries& entries) {
  nlohmann::ordered_json frames = nlohmann::ordered_json::array();
  for (const auto& f : scoring.frames) frames.push_back(ddfh::frame_score_json(f));
  const auto& d = scoring.diagnostics;
  nlohmann::ordered_json j{{"engine", std::string(ddfh::kEngineName)},
                           {"engine_version", std::string(ddfh::kEngineVersion)},
                           {"config_hash", hash},
                           {"config", ddfh::config_json(entries)},
                           {"frames", std::move(frames)},
                           {"reference_sets",
                            {{"s_dd", d.s_dd}, {"s_nov", d.s_nov}, {"s_var", d.s_var}, {"s_cor", d.s_cor}}},
                           {"warnings", d.warnings}};
  if (d.tsne) j["tsne"] = tsne_json(*d.tsne);
  return j;
}

int run_score(const Options& opt) {
  const auto s = load_settings(opt, false);
  const auto pool = load_pool(opt, s, true);
  const auto dir = output_dir(opt);
  const auto entries = echo(s);
  const auto hash = ddfh::config_hash(entries);
  const auto scoring = ddfh::score_pool(pool, s.sim.round);
  auto csv = open_output(dir / "scores.csv");
  ddfh::write_score_csv(scoring.frames, hash, csv);
  auto js = open_output(dir / "scores_diagnostics.json");
  js << scoring_json(scoring, hash, entries).dump(2) << '\n';
  for (const auto& w : scoring.diagnostics.warnings) log(opt, "warning: " + w);
  return kExitOk;
}

int run_select(const Options& opt) {
  const auto s = load_settings(opt, false);
  const auto pool = load_pool(opt, s, true);
  const auto dir = output_dir(opt);
  const auto entries = echo(s);
  ddfh::PoolScoring scoring;
  auto manifest = ddfh::run_selection(pool, s.sim.round, nullptr, &scoring);
  manifest.config = entries;
  manifest.config_hash = ddfh::config_hash(entries);
  auto mf = open_output(dir / "manifest.json");
  ddfh::write_manifest(manifest, mf);
  auto csv = open_output(dir / "scores.csv");
  ddfh::write_score_csv(manifest.ranking, manifest.config_hash, csv);
  for (const auto& w : scoring.diagnostics.warnings) log(opt, "warning: " + w);
  log(opt, "selected " + std::to_string(manifest.selected.size()) + " frame(s)");
  return kExitOk;
}

int run_simulate(const Options& opt) {
  if (opt.config.empty()) throw ddfh::ConfigError("simulate requires --config");
  const auto s = load_settings(opt, true);
  const auto dir = output_dir(opt);
  const auto entries = ddfh::harness::simulation_config_entries(s.sim);
  const auto hash = ddfh::config_hash(entries);
  fs::create_directories(dir / "manifests");

  auto csv = open_output(dir / "metrics.csv");
  ddfh::harness::write_metrics_header(s.sim.synth.class_ratios.size(), hash, csv);
  for (std::uint64_t seed : s.sim.seeds) {
    auto synth = s.sim.synth;
    synth.seed = seed;
    auto round = s.sim.round;
    round.seed = seed;
    const auto pool = ddfh::harness::synth_generate(synth);
    log(opt, "seed " + std::to_string(seed) + ": " + std::to_string(pool.instance_count()) + " instances");
    const auto cache = ddfh::harness::reduce_pool(pool, round);
    for (auto strategy : s.sim.strategies) {
      const auto result = ddfh::harness::run_rounds(pool, strategy, s.sim.rounds, round, &cache);
      ddfh::harness::write_metrics_rows(result, ddfh::harness::to_string(strategy), seed, csv);
      for (std::size_t r = 0; r < result.manifests.size(); ++r) {
        auto m = result.manifests[r];
        m.config = entries;
        m.config_hash = hash;
        const auto name = std::string(ddfh::harness::to_string(strategy)) + "_seed" + std::to_string(seed) +
                          "_round" + std::to_string(r + 1) + ".json";
        auto mf = open_output(dir / "manifests" / name);
        ddfh::write_manifest(m, mf);
      }
      if (result.truncated) log(opt, "warning: pool exhausted, run truncated");
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ddfh: active-learning frame selection by distribution discrepancy, feature heterogeneity and "
               "confidence balance"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&opt](CLI::App* sub) {
    sub->add_option("--config", opt.config, "Key-value config file");
    sub->add_option("--out", opt.out, "Output directory");
    sub->add_option("--seed", opt.seed, "Seed for every stochastic stage");
    sub->add_option("--threshold", opt.threshold, "Confidence threshold");
    sub->add_flag("--verbose", opt.verbose, "Log progress and warnings to stderr");
  };
  auto add_round = [&opt](CLI::App* sub) {
    sub->add_option("--input", opt.input, "Instance file (.jsonl or .csv)");
    sub->add_option("--labels", opt.labels, "Labeled frame ids, one per line");
    sub->add_option("--budget", opt.budget, "Annotation budget (frames or boxes)");
    sub->add_option("--budget-mode", opt.budget_mode, "frames | boxes");
    sub->add_option("--stride", opt.stride, "Keep every n-th unlabeled frame as a candidate");
  };

  auto* reduce = app.add_subcommand("reduce", "Project instance embeddings to 2-D with exact t-SNE");
  add_common(reduce);
  reduce->add_option("--input", opt.input, "Instance file (.jsonl or .csv)");
  reduce->add_option("--labels", opt.labels, "Labeled frame ids (optional)");
  auto* score = app.add_subcommand("score", "Score every unlabeled candidate frame");
  add_common(score);
  add_round(score);
  auto* select = app.add_subcommand("select", "Score and select the top frames within the budget");
  add_common(select);
  add_round(select);
  auto* simulate = app.add_subcommand("simulate", "Run multi-round selection on synthetic pools");
  add_common(simulate);
  simulate->add_option("--strategy", opt.strategy, "ddfh | random | conf_entropy");
  simulate->add_option("--budget", opt.budget, "Annotation budget per round");
  simulate->add_option("--budget-mode", opt.budget_mode, "frames | boxes");
  simulate->add_option("--stride", opt.stride, "Candidate stride");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const char* stage = "setup";
  try {
    if (*reduce) {
      stage = "reduce";
      return run_reduce(opt);
    }
    if (*score) {
      stage = "score";
      return run_score(opt);
    }
    if (*select) {
      stage = "select";
      return run_select(opt);
    }
    stage = "simulate";
    return run_simulate(opt);
  } catch (const ddfh::StageError& e) {
    std::cerr << "ddfh " << stage << ": " << e.what() << '\n';
    switch (e.kind()) {
      case ddfh::StageError::Kind::config: return kExitConfig;
      case ddfh::StageError::Kind::data: return kExitData;
      case ddfh::StageError::Kind::invariant: return kExitInternal;
    }
    return kExitInternal;
  } catch (const ddfh::ConfigError& e) {
    std::cerr << "ddfh " << stage << ": config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ddfh::DataError& e) {
    std::cerr << "ddfh " << stage << ": data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "ddfh " << stage << ": internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}
