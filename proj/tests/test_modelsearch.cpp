#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "qnas/error.hpp"
#include "qnas/modelsearch.hpp"
#include "testutil.hpp"

using namespace qnas;
using qnas::test::data_dir;
using qnas::test::enumerate_architectures;
using qnas::test::toy_hyperspace;

namespace {

struct Fixture {
  Hyperspace hs = toy_hyperspace(false, true);  // depth 1-2, kernels {3,5}
  AccuracyLut lut = synth_lut(hs, 7);
  LatencyPredictor pred = LatencyPredictor::train(
      synth_samples(SyntheticDevice::load(data_dir() / "presets/synth_cpu.json"),
                    GridSpec::standard(), 3, 0.0));
  SearchSpace space = enumerate_spaces(hs).back();
  std::vector<Architecture> archs = enumerate_architectures(space);
  double constraint = 0;
  double best_feasible_proxy = 0;

  Fixture() {
    std::vector<double> lats;
    for (const auto& a : archs) lats.push_back(predict_latency(pred, a, Precision::Int8));
    auto sorted = lats;
    std::sort(sorted.begin(), sorted.end());
    constraint = sorted[sorted.size() * 3 / 5];
    for (size_t i = 0; i < archs.size(); ++i)
      if (lats[i] <= constraint)
        best_feasible_proxy = std::max(best_feasible_proxy, accuracy_proxy(lut, archs[i]));
  }

  ModelSearchConfig config(uint64_t seed) const {
    ModelSearchConfig cfg;
    cfg.latency_constraint_ms = constraint;
    cfg.budget = 600;
    cfg.population = 40;
    cfg.tournament = 8;
    cfg.seed = seed;
    return cfg;
  }
};

const Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("search stays within budget and the latency constraint") {
  const auto& f = fixture();
  auto cfg = f.config(4);
  auto result = search_models(f.space, f.lut, f.pred, cfg);
  CHECK(result.evaluations <= static_cast<size_t>(cfg.budget));
  CHECK(result.best_curve.size() == result.evaluations);
  CHECK(std::is_sorted(result.best_curve.begin(), result.best_curve.end()));
  CHECK(result.best.latency_ms <= cfg.latency_constraint_ms);
  CHECK(result.best.proxy == result.best_curve.back());
  for (const auto& e : result.pareto) CHECK(e.latency_ms <= cfg.latency_constraint_ms);
  CHECK(validate_architecture(result.best.arch, f.space) == std::nullopt);
}

TEST_CASE("search recovers the exhaustive feasible optimum") {
  const auto& f = fixture();
  int hits = 0;
  const int runs = 20;
  for (int s = 0; s < runs; ++s) {
    auto result = search_models(f.space, f.lut, f.pred, f.config(200 + s));
    CHECK(result.best.proxy <= f.best_feasible_proxy + 1e-12);
    if (result.best.proxy == doctest::Approx(f.best_feasible_proxy).epsilon(1e-12)) ++hits;
  }
  INFO(hits, "/", runs, " searches found the best feasible architecture");
  CHECK(hits >= 19);
}

TEST_CASE("the pareto front is consistent with the archive") {
  const auto& f = fixture();
  auto result = search_models(f.space, f.lut, f.pred, f.config(7));
  REQUIRE(!result.pareto.empty());
  for (size_t i = 1; i < result.pareto.size(); ++i) {
    CHECK(result.pareto[i].latency_ms >= result.pareto[i - 1].latency_ms);
    CHECK(result.pareto[i].proxy > result.pareto[i - 1].proxy);
  }
  CHECK(result.pareto.back().proxy == result.best.proxy);
}

TEST_CASE("pareto_front drops dominated points") {
  auto mk = [](double lat, double proxy, size_t order) {
    EvaluatedArch e;
    e.latency_ms = lat;
    e.proxy = proxy;
    e.order = order;
    return e;
  };
  auto front = pareto_front({mk(3.0, 0.50, 0), mk(1.0, 0.40, 1), mk(2.0, 0.45, 2),
                             mk(2.5, 0.44, 3), mk(1.0, 0.38, 4), mk(3.5, 0.50, 5)});
  REQUIRE(front.size() == 3);
  CHECK(front[0].latency_ms == 1.0);
  CHECK(front[0].proxy == 0.40);
  CHECK(front[1].latency_ms == 2.0);
  CHECK(front[2].latency_ms == 3.0);
  CHECK(front[2].proxy == 0.50);
  CHECK(pareto_front({}).empty());
}

TEST_CASE("mutation and crossover stay inside the space") {
  auto hs = Hyperspace::load(data_dir() / "presets/cpu_vnni.json");
  auto space = decode_space("216340-102132", hs);
  RngStream rng(11);
  auto a = sample_architecture(space, rng);
  auto b = sample_architecture(space, rng);
  for (int trial = 0; trial < 400; ++trial) {
    auto m = mutate_architecture(a, space, 0.3, rng);
    CHECK(validate_architecture(m, space) == std::nullopt);
    auto c = crossover_architecture(a, b, rng);
    CHECK(validate_architecture(c, space) == std::nullopt);
    CHECK(c.stages.size() == a.stages.size());
    if (trial % 10 == 0) a = m;  // walk around the space a bit
  }
  // rate 0 leaves the architecture untouched
  auto same = mutate_architecture(a, space, 0.0, rng);
  CHECK(same.describe() == a.describe());
}

TEST_CASE("crossover takes a prefix from one parent and a suffix from the other") {
  auto hs = Hyperspace::load(data_dir() / "presets/cpu_vnni.json");
  auto space = decode_space("111111-000000", hs);
  RngStream rng(13);
  auto a = sample_architecture(space, rng);
  auto b = sample_architecture(space, rng);
  auto c = crossover_architecture(a, b, rng);
  CHECK(c.resolution == a.resolution);
  CHECK(c.stem.conv_width == a.stem.conv_width);
  // stages match a up to some cut, b afterwards
  auto stage_eq = [](const StageConfig& x, const StageConfig& y) {
    if (x.layers.size() != y.layers.size()) return false;
    for (size_t i = 0; i < x.layers.size(); ++i) {
      if (x.layers[i].kernel != y.layers[i].kernel || x.layers[i].width != y.layers[i].width ||
          x.layers[i].expand != y.layers[i].expand)
        return false;
    }
    return true;
  };
  size_t cut = 0;
  while (cut < c.stages.size() && stage_eq(c.stages[cut], a.stages[cut])) ++cut;
  for (size_t i = cut; i < c.stages.size(); ++i) CHECK(stage_eq(c.stages[i], b.stages[i]));
}

TEST_CASE("search is deterministic in the seed") {
  const auto& f = fixture();
  auto a = search_models(f.space, f.lut, f.pred, f.config(5));
  auto b = search_models(f.space, f.lut, f.pred, f.config(5));
  CHECK(a.best.arch.describe() == b.best.arch.describe());
  CHECK(a.best.latency_ms == b.best.latency_ms);
  CHECK(a.evaluations == b.evaluations);
  CHECK(a.pareto.size() == b.pareto.size());
}

TEST_CASE("an unmeetable constraint raises the infeasible exit code") {
  const auto& f = fixture();
  auto cfg = f.config(1);
  cfg.latency_constraint_ms = 1e-6;
  try {
    search_models(f.space, f.lut, f.pred, cfg);
    FAIL("expected InfeasibleConstraint");
  } catch (const InfeasibleConstraint& e) {
    CHECK(static_cast<int>(e.code()) == static_cast<int>(ExitCode::Infeasible));
  }
}

TEST_CASE("config validation") {
  const auto& f = fixture();
  auto cfg = f.config(1);
  cfg.latency_constraint_ms = 0;
  CHECK_THROWS_AS(search_models(f.space, f.lut, f.pred, cfg), BadFormat);
  cfg = f.config(1);
  cfg.budget = cfg.population - 1;
  CHECK_THROWS_AS(search_models(f.space, f.lut, f.pred, cfg), BadFormat);
  cfg = f.config(1);
  cfg.tournament = cfg.population + 1;
  CHECK_THROWS_AS(search_models(f.space, f.lut, f.pred, cfg), BadFormat);
  cfg = f.config(1);
  cfg.mutation_rate = 1.5;
  CHECK_THROWS_AS(search_models(f.space, f.lut, f.pred, cfg), BadFormat);
}
