// Acceptance checks for the whole pipeline. Each criterion prints exactly one
// PASS/FAIL line; the process exits nonzero if any criterion fails. Thresholds
// and time budgets are fixed here and are not tunable from outside.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qnas/accmodel.hpp"
#include "qnas/archspace.hpp"
#include "qnas/costmodel.hpp"
#include "qnas/error.hpp"
#include "qnas/evolution.hpp"
#include "qnas/modelsearch.hpp"
#include "qnas/qtscore.hpp"
#include "qnas/util.hpp"
#include "testutil.hpp"

using namespace qnas;
using qnas::test::data_dir;
using qnas::test::enumerate_architectures;
using qnas::test::run_cli;
using qnas::test::slurp;
using qnas::test::tmp_dir;
using qnas::test::toy_hyperspace;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

void require(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

void require_close(double got, double want, double tol, const std::string& what) {
  if (std::abs(got - want) > tol * std::max(1.0, std::abs(want))) {
    std::ostringstream os;
    os << what << ": got " << fmt_double(got) << ", want " << fmt_double(want);
    fail(os.str());
  }
}

// Shared fixtures, built once on first use.
struct Env {
  SyntheticDevice cpu = SyntheticDevice::load(data_dir() / "presets/synth_cpu.json");
  SyntheticDevice mobile = SyntheticDevice::load(data_dir() / "presets/synth_mobile.json");
  Hyperspace hs_cpu = Hyperspace::load(data_dir() / "presets/cpu_vnni.json");
  Hyperspace hs_mobile = Hyperspace::load(data_dir() / "presets/pixel4.json");
  LatencyPredictor pred_cpu =
      LatencyPredictor::train(synth_samples(cpu, GridSpec::standard(), 3, 0.02), cpu.id);
  LatencyPredictor pred_mobile =
      LatencyPredictor::train(synth_samples(mobile, GridSpec::standard(), 3, 0.02), mobile.id);
  // Noise-free tables for the exhaustive-equivalence and search criteria.
  LatencyPredictor pred_exact =
      LatencyPredictor::train(synth_samples(cpu, GridSpec::standard(), 3, 0.0));
  Hyperspace toy_wide = toy_hyperspace(true);
  AccuracyLut lut_wide = synth_lut(toy_wide, 7);
  Hyperspace toy = toy_hyperspace();
  AccuracyLut lut_toy = synth_lut(toy, 7);
  AccuracyLut lut_cpu = synth_lut(hs_cpu, 7);
};

Env& env() {
  static Env e;
  return e;
}

// ---- criterion 1: space encoding round-trip ----

void c1_roundtrip(std::string& detail) {
  auto& e = env();
  size_t total = 0;
  for (const Hyperspace* hs : {&e.hs_cpu, &e.hs_mobile}) {
    for (int i = 0; i < 100000; ++i) {
      RngStream rng(mix_seed(4242, static_cast<uint64_t>(i)));
      SearchSpace space = random_space(*hs, rng);
      std::string enc = space.encode();
      SearchSpace back = decode_space(enc, *hs);
      require(back.block_index() == space.block_index() &&
                  back.width_start() == space.width_start(),
              "decode(encode) changed the space: " + enc);
      require(back.encode() == enc, "encode(decode) changed the text: " + enc);
      ++total;
    }
  }
  // worked example: the all-first-window space of the CPU preset
  auto space = decode_space("111111-000000", e.hs_cpu);
  const std::vector<std::vector<int>> want = {
      {32, 48}, {32, 48}, {64, 80, 96}, {112, 128, 144},
      {192, 208, 224, 240, 256}, {304, 320, 336, 352, 368, 384, 400}};
  for (int s = 0; s < 6; ++s) {
    require(space.stage_block(s) == BlockId::MBv2, "worked example: wrong block family");
    require(space.stage_widths(s) == want[s], "worked example: wrong width window");
  }
  require(space.encode() == "111111-000000", "worked example: re-encode mismatch");
  detail = std::to_string(total) + " spaces round-tripped on both presets";
}

// ---- criterion 2: predictor fidelity on held-out models ----

void c2_predictor(std::string& detail) {
  auto& e = env();
  std::ostringstream os;
  struct Case {
    const SyntheticDevice* dev;
    const LatencyPredictor* pred;
    const Hyperspace* hs;
  } cases[] = {{&e.cpu, &e.pred_cpu, &e.hs_cpu}, {&e.mobile, &e.pred_mobile, &e.hs_mobile}};
  const int n = 2000;
  for (const auto& c : cases) {
    for (Precision p : {Precision::Int8, Precision::Fp32}) {
      int within10 = 0;
      double sq_err = 0;
      for (int i = 0; i < n; ++i) {
        RngStream rng(mix_seed(1, 0x407du, static_cast<uint64_t>(i)));
        auto arch = sample_architecture(random_space(*c.hs, rng), rng);
        auto kernels = decompose(arch);
        double truth = 0;
        for (const auto& k : kernels) truth += c.dev->latency(k, p);
        double rel = c.pred->predict_total(kernels, p) / truth - 1.0;
        if (std::abs(rel) <= 0.10) ++within10;
        sq_err += rel * rel;
      }
      double frac = static_cast<double>(within10) / n;
      os << c.dev->id << "/" << precision_name(p) << "=" << within10 << "/" << n
         << " rmse=" << fmt_double(std::sqrt(sq_err / n)) << " ";
      require(frac >= 0.90, c.dev->id + " " + precision_name(p) + ": only " +
                                std::to_string(within10) + "/" + std::to_string(n) +
                                " models within 10%");
    }
  }
  detail = os.str() + "(within +-10%, relative rmse)";
}

// ---- criterion 3: sampled Q-T score equals exhaustive enumeration ----

void c3_qt_equivalence(std::string& detail) {
  auto& e = env();
  auto spaces = enumerate_spaces(e.toy_wide);
  RngStream pick(31);
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto& space = spaces[pick.index(spaces.size())];
    auto archs = enumerate_architectures(space);
    std::vector<double> lats;
    std::vector<double> proxies;
    for (const auto& a : archs) {
      lats.push_back(predict_latency(e.pred_exact, a, Precision::Int8));
      proxies.push_back(accuracy_proxy(e.lut_wide, a));
    }
    auto sorted = lats;
    std::sort(sorted.begin(), sorted.end());
    QtConfig cfg;
    cfg.constraints = {(sorted[sorted.size() / 4] + sorted[sorted.size() / 4 + 1]) / 2,
                       (sorted[3 * sorted.size() / 4] + sorted[3 * sorted.size() / 4 + 1]) / 2};
    cfg.num_samples = 3000;
    cfg.top_k = 3;
    cfg.seed = 17 + static_cast<uint64_t>(trial);
    auto report = evaluate_qt(space, e.lut_wide, e.pred_exact, cfg);
    require(report.distinct_archs == static_cast<int>(archs.size()),
            "sample pool failed to cover " + space.encode());
    for (size_t c = 0; c < cfg.constraints.size(); ++c) {
      std::vector<double> feas;
      for (size_t i = 0; i < archs.size(); ++i)
        if (lats[i] <= cfg.constraints[c]) feas.push_back(proxies[i]);
      double want = 0;
      if (!feas.empty()) {
        std::sort(feas.rbegin(), feas.rend());
        size_t k = std::min<size_t>(feas.size(), static_cast<size_t>(cfg.top_k));
        for (size_t i = 0; i < k; ++i) want += feas[i];
        want /= static_cast<double>(k);
      }
      require_close(report.per_constraint[c].score, want, 1e-12,
                    space.encode() + " constraint " + fmt_double(cfg.constraints[c]));
      require(report.per_constraint[c].feasible_count == static_cast<int>(feas.size()),
              space.encode() + ": feasible count mismatch");
    }
    ++checked;
  }
  detail = std::to_string(checked) + " spaces match exhaustive scoring within 1e-12";
}

// ---- helpers for the evolution criteria ----

EvolutionConfig toy_evolution_config(const Env& e, uint64_t seed) {
  std::vector<double> min_lats;
  for (const auto& space : enumerate_spaces(e.toy))
    min_lats.push_back(predict_latency(e.pred_exact, min_architecture(space), Precision::Int8));
  std::sort(min_lats.begin(), min_lats.end());
  EvolutionConfig cfg;
  cfg.total_spaces = 160;  // 10x the 16 spaces of the toy hyperspace
  cfg.population = 20;
  cfg.sample_size = 6;
  cfg.seed = seed;
  cfg.qt.constraints = {min_lats[static_cast<size_t>(0.35 * (min_lats.size() - 1))],
                        min_lats[static_cast<size_t>(0.8 * (min_lats.size() - 1))]};
  cfg.qt.num_samples = 400;
  cfg.qt.top_k = 5;
  cfg.qt.seed = 99;
  return cfg;
}

// ---- criterion 4: evolution finds the optimum and beats random search ----

void c4_evolution_quality(std::string& detail) {
  auto& e = env();
  auto base = toy_evolution_config(e, 0);
  double optimum = -1;
  for (const auto& space : enumerate_spaces(e.toy))
    optimum = std::max(optimum, evaluate_qt(space, e.lut_toy, e.pred_exact, base.qt).total);

  int hits = 0, not_worse = 0;
  double evo_mean = 0, rnd_mean = 0;
  const int runs = 100;
  for (int s = 0; s < runs; ++s) {
    auto cfg = toy_evolution_config(e, 1000 + static_cast<uint64_t>(s));
    auto evo = evolve(e.toy, cfg, e.lut_toy, e.pred_exact);
    auto rnd = random_search(e.toy, cfg, e.lut_toy, e.pred_exact);
    if (evo.best_score == optimum) ++hits;
    if (evo.best_score >= rnd.best_score) ++not_worse;
    evo_mean += evo.best_score / runs;
    rnd_mean += rnd.best_score / runs;
  }
  detail = "optimum " + std::to_string(hits) + "/100, >=random " + std::to_string(not_worse) +
           "/100, mean " + fmt_double(evo_mean) + " vs " + fmt_double(rnd_mean);
  require(hits >= 95, "evolution reached the exhaustive optimum only " + std::to_string(hits) +
                          "/100 times (need 95)");
  require(not_worse >= 80, "evolution matched or beat random search only " +
                               std::to_string(not_worse) + "/100 times (need 80)");
  require(evo_mean >= rnd_mean, "mean best score fell below the random baseline");
}

// ---- criterion 5: full-scale aging-evolution mechanics ----

void c5_full_scale(std::string& detail) {
  auto& e = env();
  // calibrate budgets from typical sampled models, not space minima: the Q-T
  // pool is uniform over each space, so constraints must sit in that range
  std::vector<double> lats;
  for (int i = 0; i < 300; ++i) {
    RngStream rng(mix_seed(77, static_cast<uint64_t>(i)));
    auto arch = sample_architecture(random_space(e.hs_cpu, rng), rng);
    lats.push_back(predict_latency(e.pred_cpu, arch, Precision::Int8));
  }
  std::sort(lats.begin(), lats.end());

  EvolutionConfig cfg;
  cfg.total_spaces = 5000;
  cfg.population = 500;
  cfg.sample_size = 125;
  cfg.seed = 12;
  cfg.qt.constraints = {lats[89], lats[209]};  // 30th / 70th percentile
  cfg.qt.num_samples = 100;
  cfg.qt.top_k = 10;
  cfg.qt.seed = 5;

  MechanicsProbe probe;
  auto result = evolve(e.hs_cpu, cfg, e.lut_cpu, e.pred_cpu, &probe);

  const size_t P = 500, iterations = (5000 - P) / 2;
  require(probe.population_after_iteration.size() == iterations, "iteration count");
  for (size_t n : probe.population_after_iteration)
    require(n == P, "population size drifted from P");
  require(probe.deaths.size() == 2 * iterations, "death count");
  for (size_t d = 0; d < probe.deaths.size(); ++d) {
    const auto& death = probe.deaths[d];
    require(death.initial == (d < P), "seed population must leave first");
    if (death.initial) {
      require(death.init_position == d, "seed eviction order");
      require(death.death_iteration == death.init_position / 2 + 1, "seed lifetime");
    } else {
      require(death.death_iteration == death.birth_iteration + P / 2, "child lifetime");
    }
  }
  require(result.best_curve.size() == 5000, "one best-so-far point per evaluated space");
  require(std::is_sorted(result.best_curve.begin(), result.best_curve.end()),
          "best-so-far must be nondecreasing");
  require(result.best_curve.back() == result.best_score, "best mismatch");
  require(result.best_score > 0, "full-scale run must find a scoring space");
  require(result.evaluations <= 5000, "evaluation budget exceeded");
  require(result.log.records.size() == iterations + 1, "log record count");

  const double t_max = cfg.qt.constraints.back();
  size_t children = 0;
  for (const auto& rec : result.log.records)
    for (const auto& child : rec.children) {
      require(space_feasible(decode_space(child.encoding, e.hs_cpu), e.pred_cpu, t_max),
              "screen admitted an infeasible child: " + child.encoding);
      ++children;
    }
  require(children == 2 * iterations, "two children per iteration");
  detail = "N=5000 P=500 S=125: " + std::to_string(result.evaluations) +
           " distinct spaces, best " + fmt_double(result.best_score);
}

// ---- criterion 6: model search equals exhaustive search ----

void c6_model_search(std::string& detail) {
  auto& e = env();
  Hyperspace hs = toy_hyperspace(false, true);
  AccuracyLut lut = synth_lut(hs, 7);
  auto space = enumerate_spaces(hs).back();
  auto archs = enumerate_architectures(space);
  std::vector<double> lats;
  for (const auto& a : archs) lats.push_back(predict_latency(e.pred_exact, a, Precision::Int8));
  auto sorted = lats;
  std::sort(sorted.begin(), sorted.end());
  const double t = sorted[sorted.size() * 3 / 5];
  double best = 0;
  for (size_t i = 0; i < archs.size(); ++i)
    if (lats[i] <= t) best = std::max(best, accuracy_proxy(lut, archs[i]));

  int hits = 0;
  const int runs = 100;
  for (int s = 0; s < runs; ++s) {
    ModelSearchConfig cfg;
    cfg.latency_constraint_ms = t;
    cfg.budget = 600;
    cfg.population = 40;
    cfg.tournament = 8;
    cfg.seed = 500 + static_cast<uint64_t>(s);
    auto result = search_models(space, lut, e.pred_exact, cfg);
    require(result.best.proxy <= best + 1e-12, "search exceeded the exhaustive optimum");
    require(result.best.latency_ms <= t, "search returned an infeasible best");
    if (std::abs(result.best.proxy - best) <= 1e-12) ++hits;
  }
  detail = std::to_string(hits) + "/100 searches found the exhaustive best (" +
           std::to_string(archs.size()) + " archs, budget 600)";
  require(hits >= 95, "model search found the optimum only " + std::to_string(hits) +
                          "/100 times (need 95)");
}

// ---- criterion 7: reference model cost ----

void c7_reference_flops(std::string& detail) {
  auto arch = Architecture::load(data_dir() / "reference/mobilenet_v2.json");
  uint64_t macs = flops(arch);
  detail = std::to_string(macs) + " MACs, " + std::to_string(decompose(arch).size()) + " kernels";
  require(macs >= static_cast<uint64_t>(300e6 * 0.95) && macs <= static_cast<uint64_t>(300e6 * 1.05),
          "reference model cost " + std::to_string(macs) + " MACs is outside 300M +-5%");
}

// ---- criterion 8: CLI runs are byte-for-byte reproducible ----

void c8_cli_determinism(std::string& detail) {
  auto& e = env();
  auto dir = tmp_dir("acceptance_c8");
  e.toy.save(dir / "toy.json");
  e.lut_toy.save(dir / "toy_lut.csv");
  e.pred_exact.save(dir / "pred.json");

  std::vector<double> lats;
  for (const auto& space : enumerate_spaces(e.toy))
    lats.push_back(predict_latency(e.pred_exact, min_architecture(space), Precision::Int8));
  std::sort(lats.begin(), lats.end());
  std::string cmd = "evolve-space --hyperspace toy.json --lut toy_lut.csv --predictor pred.json"
                    " --total-spaces 60 --population 10 --sample-size 4 --constraints " +
                    fmt_double(lats[lats.size() / 2]) + "," + fmt_double(lats[lats.size() - 2]) +
                    " --num-samples 300 --top-k 3 --seed 21 --out-dir ";
  auto r1 = run_cli(cmd + "a", dir);
  require(r1.code == 0, "first CLI run failed: " + r1.output);
  auto r2 = run_cli(cmd + "b", dir);
  require(r2.code == 0, "second CLI run failed: " + r2.output);
  require(r1.output == r2.output, "stdout differs between identical runs");
  for (const char* name : {"best_space.json", "evolve_log.jsonl", "manifest.json"}) {
    auto a = slurp(dir / "a" / name), b = slurp(dir / "b" / name);
    require(!a.empty(), std::string(name) + " missing or empty");
    require(a == b, std::string(name) + " differs between identical runs");
  }
  detail = "evolve-space twice: stdout and all artifacts byte-identical";
}

// ---- criterion 9: INT8 behavior of the synthetic devices ----

void c9_int8_behavior(std::string& detail) {
  auto& e = env();
  std::ostringstream os;
  for (int k : {1, 3, 5, 7}) {
    Kernel kr{KernelKind::ConvBnAct, 56, 56, 96, 96, k, 1, "relu"};
    double ratio = e.cpu.latency(kr, Precision::Fp32) / e.cpu.latency(kr, Precision::Int8);
    os << "k" << k << "=" << fmt_double(ratio) << " ";
    require(ratio >= 3.5 && ratio <= 4.0,
            "conv k=" + std::to_string(k) + " int8 speedup " + fmt_double(ratio) +
                " outside [3.5, 4.0]");
  }
  auto dw = [&](int c) {
    return e.cpu.latency({KernelKind::DwConvBnAct, 28, 28, c, c, 3, 1, "relu"}, Precision::Int8);
  };
  for (int c = 97; c <= 112; ++c)
    require(dw(c) == dw(112), "dwconv latency must be flat between vector-width multiples");
  require(dw(96) < dw(97) && dw(112) < dw(113),
          "dwconv latency must step up at vector-width multiples");
  // hswish has no fast INT8 path: running it standalone is slower than fp32
  Kernel hswish{KernelKind::ActivationOnly, 28, 28, 96, 96, 1, 1, "hswish"};
  require(e.cpu.latency(hswish, Precision::Int8) > e.cpu.latency(hswish, Precision::Fp32),
          "hswish should be an INT8 penalty");
  detail = os.str() + "| dwconv steps at multiples of 16 | hswish int8 penalty holds";
}

struct Criterion {
  std::string name;
  std::string description;
  std::function<void(std::string&)> fn;
  double budget_seconds;
};

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {"criterion-1", "space encoding round-trip on both presets", c1_roundtrip, 10},
      {"criterion-2", "predictor within 10% on 2000 held-out models per device", c2_predictor, 30},
      {"criterion-3", "sampled Q-T score equals exhaustive enumeration", c3_qt_equivalence, 10},
      {"criterion-4", "evolution reaches the toy optimum and is not worse than random",
       c4_evolution_quality, 120},
      {"criterion-5", "full-scale run N=5000 P=500 S=125 with exact aging mechanics",
       c5_full_scale, 600},
      {"criterion-6", "model search matches exhaustive search under the budget",
       c6_model_search, 120},
      {"criterion-7", "reference model costs 300M MACs within 5%", c7_reference_flops, 1},
      {"criterion-8", "CLI evolve-space is byte-for-byte reproducible", c8_cli_determinism, 60},
      {"criterion-9", "synthetic devices show the INT8 speedups and penalties",
       c9_int8_behavior, 5},
  };

  int failures = 0;
  for (auto& c : criteria) {
    std::string detail;
    bool ok = true;
    auto t0 = std::chrono::steady_clock::now();
    try {
      c.fn(detail);
    } catch (const std::exception& ex) {
      ok = false;
      detail = ex.what();
    }
    double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (ok && dt > c.budget_seconds) {
      ok = false;
      detail = "exceeded time budget: " + fmt_double(dt) + "s > " +
               fmt_double(c.budget_seconds) + "s";
    }
    std::printf("%s %s: %s [%s] (%.1fs)\n", ok ? "PASS" : "FAIL", c.name.c_str(),
                c.description.c_str(), detail.c_str(), dt);
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  if (failures) std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
