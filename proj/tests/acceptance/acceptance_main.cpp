// Acceptance suite: one PASS/FAIL line per release criterion.
//
//   acceptance [NAME...]
//
// With arguments, runs only the criteria whose names contain one of them.
// Exits 1 if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "ddfh/ddfh.hpp"
#include "ddfh/harness/simulate.hpp"
#include "ddfh/harness/synth.hpp"
#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

namespace fs = std::filesystem;

namespace ddfh::acceptance {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double time_limit_s;  // 0 means no limit
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Worst absolute error against a tolerance, with a count of comparisons.
struct ErrorTally {
  double worst = 0.0;
  std::size_t count = 0;
  void add(double got, double want) {
    ++count;
    const double e = std::abs(got - want);
    if (!(e <= worst)) worst = std::isnan(e) ? INFINITY : e;
  }
};

Outcome kernel_oracles() {
  Rng rng(20240611);
  std::vector<std::pair<std::string, ErrorTally>> rows;
  auto tally = [&rows](const std::string& name) -> ErrorTally& {
    rows.emplace_back(name, ErrorTally{});
    return rows.back().second;
  };
  constexpr int kCases = 1000;

  auto& qt_err = tally("qt_apply");
  for (int t = 0; t < kCases; ++t) {
    std::vector<double> ref(1 + rng.below(200));
    for (auto& v : ref) v = std::round(rng.normal(0.0, 3.0) * 8.0) / 8.0;
    const auto map = qt_fit(ref);
    const double x = rng.uniform() < 0.3 ? ref[rng.below(ref.size())] : rng.normal(0.0, 4.0);
    qt_err.add(qt_apply(map, x), oracle::qt(ref, x));
  }

  auto& pearson_err = tally("pearson_mean");
  for (int t = 0; t < kCases; ++t) {
    const auto cols = static_cast<Eigen::Index>(2 + rng.below(40));
    Eigen::MatrixXd m(8, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, rng.uniform(0.1, 5.0));
    oracle::Rows rows_(8);
    for (Eigen::Index r = 0; r < 8; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) rows_[static_cast<std::size_t>(r)].push_back(m(r, c));
    }
    pearson_err.add(pearson_mean(m), oracle::pearson(rows_));
  }

  auto& het_err = tally("heterogeneity_scores");
  for (int t = 0; t < kCases; ++t) {
    std::vector<FusedFeature> mine(1 + rng.below(6)), lab(1 + rng.below(40));
    for (auto& f : mine) f = test::random_feature(rng);
    for (auto& f : lab) f = test::random_feature(rng, 2.0);
    const auto h = heterogeneity_scores(feature_matrix(mine), feature_matrix(lab));
    const auto o = oracle::heterogeneity(mine, lab);
    het_err.add(h.s_var, o.s_var);
    het_err.add(h.s_cor, o.s_cor);
  }

  auto& pdf_err = tally("gmm_pdf");
  for (int t = 0; t < kCases; ++t) {
    const auto model = test::random_mixture<8>(rng, 1 + rng.below(10));
    const auto f = test::random_feature(rng, 1.5);
    pdf_err.add(gmm_pdf(model, f), oracle::gmm_pdf(model, f));
  }

  auto& cb_err = tally("frame_i_cb");
  for (int t = 0; t < kCases; ++t) {
    std::vector<double> sums(1 + rng.below(8));
    for (auto& v : sums) v = rng.uniform() < 0.2 ? 0.0 : rng.uniform(0.0, 20.0);
    cb_err.add(frame_i_cb(sums), oracle::softmax_entropy(sums));
  }

  auto& dd_err = tally("frame_i_dd");
  for (int t = 0; t < kCases; ++t) {
    std::vector<double> dd(2 + rng.below(80)), nov(dd.size());
    for (auto& v : dd) v = rng.normal(0.0, 2.0);
    for (auto& v : nov) v = -std::exp(rng.normal(0.0, 3.0));
    std::vector<InstanceScores> inst(rng.below(5));
    double want = 0.0;
    for (auto& s : inst) {
      s = {rng.uniform() < 0.5 ? dd[rng.below(dd.size())] : rng.normal(0.0, 2.0), nov[rng.below(nov.size())]};
      want += oracle::qt(dd, s.s_dd) + oracle::qt(nov, s.s_nov);
    }
    if (!inst.empty()) want /= static_cast<double>(inst.size());
    dd_err.add(frame_i_dd(inst, qt_fit(dd), qt_fit(nov)), want);
  }

  auto& fh_err = tally("frame_i_fh");
  for (int t = 0; t < kCases; ++t) {
    std::vector<double> var(1 + rng.below(60)), cor(var.size());
    for (auto& v : var) v = std::exp(rng.normal());
    for (auto& v : cor) v = rng.uniform();
    const int classes = 1 + static_cast<int>(rng.below(5));
    std::vector<HeterogeneityScores> present(rng.below(static_cast<std::uint64_t>(classes) + 1));
    double want = 0.0;
    for (auto& h : present) {
      h = {std::exp(rng.normal()), rng.uniform()};
      want += oracle::qt(var, h.s_var) * oracle::qt(cor, h.s_cor);
    }
    fh_err.add(frame_i_fh(present, qt_fit(var), qt_fit(cor), classes), want / classes);
  }

  auto& total_err = tally("frame_i_total");
  for (int t = 0; t < kCases; ++t) {
    const double a = rng.normal(0.0, 3.0), b = rng.normal(0.0, 3.0), c = rng.uniform(0.0, 2.0);
    total_err.add(frame_i_total(a, b, c), (a + b) * c);
  }

  Outcome out{true, ""};
  for (const auto& [name, e] : rows) {
    const double tol = name == "frame_i_total" ? 1e-12 : 1e-9;
    const bool ok = e.count >= kCases && e.worst <= tol;
    out.pass = out.pass && ok;
    out.detail += name + " max|err|=" + fmt("%.1e", e.worst) + (ok ? "" : " (over tolerance)") + "; ";
  }
  out.detail.resize(out.detail.size() - 2);
  return out;
}

Outcome em_monotone() {
  std::size_t worst_dataset = 0, checked = 0, reseats = 0;
  double worst = INFINITY;  // smallest relative step seen
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed, "em-acceptance");
    const auto truth = test::random_mixture<8>(rng, 3 + rng.below(10), 3.0, 0.2, 2.0);
    PointSet<8> data;
    for (int i = 0; i < 1000; ++i) {
      double u = rng.uniform();
      std::size_t c = 0;
      while (c + 1 < truth.components() && u >= truth.weights()[c]) u -= truth.weights()[c++];
      const Eigen::Matrix<double, 8, 8> l = Eigen::LLT<Covariance<8>>(truth.covariances()[c]).matrixL();
      Point<8> z;
      for (int d = 0; d < 8; ++d) z[d] = rng.normal();
      data.push_back(truth.means()[c] + l * z);
    }
    // Engine defaults: k = 10, reg_covar = 1e-2, tol = 1e-4, max_iter = 200.
    GmmOptions opt;
    opt.seed = seed;
    const auto fit = gmm_fit<8>(data, opt);
    reseats += fit.reinitialized;
    for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) {
      const double prev = fit.log_likelihood[i - 1];
      const double rel = (fit.log_likelihood[i] - prev) / std::abs(prev);
      ++checked;
      if (rel < worst) {
        worst = rel;
        worst_dataset = seed;
      }
    }
  }
  const bool pass = checked > 0 && worst >= -1e-9;
  return {pass, std::to_string(checked) + " EM steps on 50 datasets; smallest relative step " + fmt("%.2e", worst) +
                    (pass ? "" : " (dataset " + std::to_string(worst_dataset) + ")") + "; " +
                    std::to_string(reseats) + " component reseat(s)"};
}

Outcome quantile_contract() {
  Rng rng(7, "qt-acceptance");
  std::vector<double> s(10000);
  for (auto& v : s) v = rng.normal(2.0, 5.0) + 0.3 * std::pow(rng.uniform(), 3.0);
  std::vector<double> sorted = s;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) return {false, "reference set has ties"};
  const auto map = qt_fit(s);
  std::vector<double> z(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) z[i] = qt_apply(map, s[i]);

  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<long long> r(v.size());
    for (std::size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<long long>(k);
    return r;
  };
  const auto rs = ranks(s), rz = ranks(z);
  std::vector<double> zs = z;
  std::sort(zs.begin(), zs.end());
  const bool z_tie_free = std::adjacent_find(zs.begin(), zs.end()) == zs.end();
  long long d2 = 0;
  for (std::size_t i = 0; i < s.size(); ++i) d2 += (rs[i] - rz[i]) * (rs[i] - rz[i]);
  const double n = static_cast<double>(s.size());
  const double spearman = 1.0 - 6.0 * static_cast<double>(d2) / (n * (n * n - 1.0));

  double ks = 0.0;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const double f = oracle::upper_tail(-zs[i]);
    ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
  }
  const bool pass = z_tie_free && spearman == 1.0 && ks < 0.05;
  return {pass, "spearman=" + fmt("%.17g", spearman) + (z_tie_free ? "" : " (output ties)") + " ks=" + fmt("%.5f", ks)};
}

bool tie_free(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return std::adjacent_find(v.begin(), v.end()) == v.end();
}

Outcome monotone_invariance() {
  std::size_t pools = 0, skipped = 0, changed = 0;
  for (std::uint64_t seed = 100; pools < 20 && seed < 200; ++seed) {
    harness::SynthConfig s;
    s.frames = 150;
    s.initial_labeled = 40;
    s.seed = seed;
    const auto pool = harness::synth_generate(s);
    RoundConfig cfg;
    cfg.seed = seed;
    cfg.budget = 10;
    const auto rf = prepare_round(pool, cfg);
    const auto dens = fit_densities(rf, cfg);
    const auto raw = instance_scores(rf, dens);
    auto warped = raw;
    std::vector<double> before, after;
    for (auto& sc : warped.scores) {
      before.push_back(sc.s_dd);
      sc.s_dd = sc.s_dd * sc.s_dd * sc.s_dd + 2.0 * sc.s_dd;
      after.push_back(sc.s_dd);
    }
    if (!tie_free(before) || !tie_free(after)) {
      ++skipped;
      continue;
    }
    ++pools;
    const auto a = select_topk(aggregate_frames(rf, raw).frames, rf.pool, cfg);
    const auto b = select_topk(aggregate_frames(rf, warped).frames, rf.pool, cfg);
    auto sa = a.selected, sb = b.selected;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa != sb) ++changed;
  }
  const bool pass = pools == 20 && changed == 0;
  return {pass, std::to_string(pools) + " tie-free pools (" + std::to_string(skipped) + " with ties skipped), " +
                    std::to_string(changed) + " selection(s) changed"};
}

Outcome confidence_balance_closed_forms() {
  double worst_uniform = 0.0, worst_peaked = 0.0;
  Rng rng(3, "icb-acceptance");
  for (int t = 0; t < 1000; ++t) {
    const std::size_t c = 2 + rng.below(9);
    std::vector<double> uniform(c, rng.uniform(0.0, 100.0));
    worst_uniform = std::max(worst_uniform, std::abs(frame_i_cb(uniform) - std::log(static_cast<double>(c))));
    std::vector<double> peaked(c);
    for (auto& v : peaked) v = rng.uniform(0.0, 10.0);
    const double rest = *std::max_element(peaked.begin(), peaked.end());
    peaked[rng.below(c)] = rest + 50.0 + rng.uniform(0.0, 20.0);
    worst_peaked = std::max(worst_peaked, frame_i_cb(peaked));
  }
  const bool pass = worst_uniform <= 1e-12 && worst_peaked < 1e-18;
  return {pass, "uniform max|I_cb - log C|=" + fmt("%.1e", worst_uniform) + "; dominant max I_cb=" +
                    fmt("%.1e", worst_peaked)};
}

Outcome tsne_two_clusters() {
  std::vector<int> labels;
  const auto x = test::two_clusters(42, 200, 16, 20.0, labels);
  TsneConfig c;
  c.seed = 7;
  const auto r = tsne_reduce(x, c);
  const double acc = test::nearest_centroid_accuracy(r.coords, labels);
  const bool pass = r.diagnostics.final_kl < r.diagnostics.initial_kl && acc >= 0.95;
  return {pass, "KL " + fmt("%.4f", r.diagnostics.initial_kl) + " -> " + fmt("%.4f", r.diagnostics.final_kl) +
                    ", accuracy " + fmt("%.3f", acc)};
}

Outcome identical_model_null() {
  Rng rng(5, "null-acceptance");
  std::size_t nonzero = 0, probes = 0;
  for (int m = 0; m < 10; ++m) {
    const auto g = test::random_mixture<8>(rng, 1 + rng.below(10));
    const GmmModel copy = g;
    for (int t = 0; t < 100; ++t) {
      ++probes;
      if (dd_score(g, copy, test::random_feature(rng, 2.0)) != 0.0) ++nonzero;
    }
  }
  return {nonzero == 0 && probes == 1000, std::to_string(probes) + " probes, " + std::to_string(nonzero) + " nonzero"};
}

// Shared simulator setup: 3 classes at 8:1:1, 2000 frames, 5 rounds of 20
// frames, seeds 0..9. Pools carry 1 or 2 instances per frame.
harness::SynthConfig sim_pool(std::uint64_t seed, double shift) {
  harness::SynthConfig s;
  s.class_ratios = {0.8, 0.1, 0.1};
  s.frames = 2000;
  s.min_instances = 1;
  s.max_instances = 2;
  s.initial_labeled = 100;
  s.labeled_shift = shift;
  s.seed = seed;
  return s;
}

RoundConfig sim_round(std::uint64_t seed) {
  RoundConfig r;
  r.seed = seed;
  r.budget = 20;
  r.budget_mode = BudgetMode::frames;
  return r;
}

double mean_finite(const std::vector<double>& v) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double x : v) {
    if (std::isfinite(x)) {
      sum += x;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : NAN;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome simulator_balance() {
  std::vector<double> ddfh_h, random_h;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto pool = harness::synth_generate(sim_pool(seed, 0.0));
    const auto cfg = sim_round(seed);
    const auto cache = harness::reduce_pool(pool, cfg);
    for (auto strategy : {harness::Strategy::ddfh, harness::Strategy::random}) {
      const auto r = harness::run_rounds(pool, strategy, 5, cfg, &cache);
      std::vector<double> h;
      for (const auto& m : r.rounds) h.push_back(m.count_entropy);
      (strategy == harness::Strategy::ddfh ? ddfh_h : random_h).push_back(mean_finite(h));
    }
  }
  const double md = median(ddfh_h), mr = median(random_h);
  return {md >= mr, "median mean count entropy ddfh=" + fmt("%.4f", md) + " random=" + fmt("%.4f", mr)};
}

Outcome simulator_coverage() {
  int improved = 0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto pool = harness::synth_generate(sim_pool(seed, 3.0));
    const auto cfg = sim_round(seed);
    const auto r = harness::run_rounds(pool, harness::Strategy::ddfh, 5, cfg);
    if (r.rounds.size() != 5) return {false, "seed " + std::to_string(seed) + " truncated"};
    // Mean over classes finite at both ends.
    const auto& d0 = r.initial_divergence;
    const auto& d5 = r.rounds.back().divergence;
    std::vector<double> a, b;
    for (std::size_t c = 0; c < d0.size(); ++c) {
      if (std::isfinite(d0[c]) && std::isfinite(d5[c])) {
        a.push_back(d0[c]);
        b.push_back(d5[c]);
      }
    }
    const double m0 = mean_finite(a), m5 = mean_finite(b);
    if (m5 < m0) ++improved;
    per_seed += fmt(" %.2f", m0) + "->" + fmt("%.2f", m5);
  }
  return {improved >= 8, std::to_string(improved) + "/10 seeds improved;" + per_seed};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome reproducibility() {
  const fs::path data = DDFH_TEST_DATA_DIR, golden = DDFH_GOLDEN_DIR;
  const fs::path scratch = fs::temp_directory_path() / ("ddfh_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(scratch);
  fs::create_directories(scratch);
  auto run = [&](const std::string& out) {
    const std::string cmd = std::string("\"") + DDFH_CLI_PATH + "\" select --input \"" +
                            (data / "pool200.jsonl").string() + "\" --labels \"" +
                            (data / "pool200_labels.txt").string() + "\" --config \"" +
                            (data / "select.cfg").string() + "\" --out \"" + (scratch / out).string() + "\"";
    return std::system(cmd.c_str());
  };
  Outcome o;
  if (run("a") != 0 || run("b") != 0) {
    o = {false, "select run failed"};
  } else {
    const auto a = slurp(scratch / "a" / "manifest.json");
    const bool same = !a.empty() && a == slurp(scratch / "b" / "manifest.json") &&
                      slurp(scratch / "a" / "scores.csv") == slurp(scratch / "b" / "scores.csv");
    const bool gold = a == slurp(golden / "manifest.json") &&
                      slurp(scratch / "a" / "scores.csv") == slurp(golden / "scores.csv");
    o = {same && gold, std::string("runs ") + (same ? "byte-identical" : "differ") + ", golden " +
                           (gold ? "matches" : "differs")};
  }
  fs::remove_all(scratch);
  return o;
}

}  // namespace
}  // namespace ddfh::acceptance

int main(int argc, char** argv) {
  using namespace ddfh::acceptance;
  const std::vector<Criterion> criteria = {
      {"kernel-oracle-equivalence", 60.0, kernel_oracles},
      {"em-monotone", 0.0, em_monotone},
      {"quantile-transform-contract", 0.0, quantile_contract},
      {"monotone-invariance", 0.0, monotone_invariance},
      {"confidence-balance-closed-forms", 0.0, confidence_balance_closed_forms},
      {"tsne-two-clusters", 30.0, tsne_two_clusters},
      {"identical-model-null", 0.0, identical_model_null},
      {"simulator-balance", 300.0, simulator_balance},
      {"simulator-coverage", 0.0, simulator_coverage},
      {"reproducibility", 0.0, reproducibility},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    if (argc > 1) {
      bool wanted = false;
      for (int i = 1; i < argc; ++i) wanted = wanted || c.name.find(argv[i]) != std::string::npos;
      if (!wanted) continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.time_limit_s > 0.0 && secs > c.time_limit_s) {
      o.pass = false;
      o.detail += "; over the " + fmt("%.0f", c.time_limit_s) + " s limit";
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << " [" << fmt("%.1f", secs) << " s]"
              << std::endl;
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
