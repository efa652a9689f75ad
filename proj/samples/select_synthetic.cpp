// Generates a small synthetic pool, scores it and prints the frames a
// single round would send to annotation.

#include <cstdio>

#include "ddfh/ddfh.hpp"
#include "ddfh/harness/synth.hpp"

int main() {
  ddfh::harness::SynthConfig synth;
  synth.frames = 120;
  synth.initial_labeled = 12;
  synth.seed = 7;
  const auto pool = ddfh::harness::synth_generate(synth);

  ddfh::RoundConfig config;
  config.budget = 5;
  config.seed = 7;
  config.tsne.iterations = 500;

  ddfh::PoolScoring scoring;
  const auto manifest = ddfh::run_selection(pool, config, nullptr, &scoring);
  std::printf("%zu candidates, %zu labeled frames\n", manifest.ranking.size(), pool.labeled().size());
  std::printf("%-8s %9s %9s %9s %9s\n", "frame", "I_dd", "I_fh", "I_cb", "I_total");
  for (std::size_t i = 0; i < manifest.selected.size(); ++i) {
    const auto& s = manifest.ranking[i];
    std::printf("%-8s %9.4f %9.4f %9.4f %9.4f\n", s.frame_id.c_str(), s.i_dd, s.i_fh, s.i_cb, s.i_total);
  }
  return 0;
}
