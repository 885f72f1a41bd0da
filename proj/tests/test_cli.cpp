#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include "qnas/accmodel.hpp"
#include "qnas/archspace.hpp"
#include "qnas/costmodel.hpp"
#include "qnas/evolution.hpp"
#include "qnas/util.hpp"
#include "testutil.hpp"

using namespace qnas;
using nlohmann::json;
using qnas::test::data_dir;
using qnas::test::run_cli;
using qnas::test::slurp;
using qnas::test::tmp_dir;
using qnas::test::toy_hyperspace;

namespace {

// One pipeline directory shared by the happy-path cases, built once.
const std::filesystem::path& pipeline() {
  static std::filesystem::path dir = [] {
    auto d = tmp_dir("cli_pipeline");
    auto dev = (data_dir() / "presets/synth_cpu.json").string();
    auto hs = (data_dir() / "presets/cpu_vnni.json").string();
    auto r1 = run_cli("synth --device " + dev + " --out-samples samples.csv --hyperspace " + hs +
                          " --out-lut lut.csv --seed 3",
                      d);
    REQUIRE_MESSAGE(r1.code == 0, r1.output);
    auto r2 = run_cli("train-predictor --samples samples.csv --out pred.json", d);
    REQUIRE_MESSAGE(r2.code == 0, r2.output);
    return d;
  }();
  return dir;
}

size_t count_lines(const std::string& s) {
  size_t n = 0;
  for (char c : s)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("synth writes the full sample grid plus a manifest") {
  const auto& d = pipeline();
  CHECK(count_lines(slurp(d / "samples.csv")) == GridSpec::standard().count() + 1);
  auto lut = AccuracyLut::load(d / "lut.csv");
  CHECK(lut.hyperspace_id == "cpu_vnni");
  CHECK(lut.size() > 0);

  auto manifest = json::parse(slurp(d / "samples.csv.manifest.json"));
  CHECK(manifest["command"] == "synth");
  CHECK(manifest["seed"] == 3);
  bool found_device = false;
  for (const auto& in : manifest["inputs"]) {
    if (in["role"] == "device") {
      found_device = true;
      CHECK(in["sha256"] == sha256_file(data_dir() / "presets/synth_cpu.json"));
    }
  }
  CHECK(found_device);
  // reruns are reproducible, so manifests carry no clocks
  CHECK(manifest.dump().find("time") == std::string::npos);
}

TEST_CASE("train-predictor emits a loadable model and a holdout report") {
  const auto& d = pipeline();
  auto pred = LatencyPredictor::load(d / "pred.json");
  CHECK(pred.table_count() > 0);

  auto dev = (data_dir() / "presets/synth_cpu.json").string();
  auto hs = (data_dir() / "presets/cpu_vnni.json").string();
  auto r = run_cli("train-predictor --samples samples.csv --out pred2.json --holdout-device " +
                       dev + " --holdout-hyperspace " + hs +
                       " --holdout-count 60 --holdout-seed 1 --report holdout.json",
                   d);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  auto report = json::parse(slurp(d / "holdout.json"));
  CHECK(report["count"] == 60);
  CHECK(report["int8"]["within_10pct"].get<double>() >= 0.9);
  CHECK(report["fp32"]["within_10pct"].get<double>() >= 0.9);
}

TEST_CASE("predict reports both precisions and the speedup") {
  const auto& d = pipeline();
  auto arch = (data_dir() / "reference/mobilenet_v2.json").string();
  auto r = run_cli("predict --arch " + arch + " --predictor pred.json", d);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  auto j = json::parse(r.output);
  CHECK(j["flops_macs"] == 300774272u);
  CHECK(j["int8_ms"].get<double>() > 0);
  CHECK(j["fp32_ms"].get<double>() > j["int8_ms"].get<double>());
  CHECK(j["int8_speedup"].get<double>() > 1.0);
  CHECK(j["int8_speedup"].get<double>() < 10.0);

  auto r2 = run_cli("predict --arch " + arch + " --predictor pred.json --out predict.json", d);
  REQUIRE(r2.code == 0);
  CHECK(json::parse(slurp(d / "predict.json"))["int8_ms"] == j["int8_ms"]);
  CHECK(std::filesystem::exists(d / "predict.json.manifest.json"));
  // byte-identical on a rerun
  auto first = slurp(d / "predict.json");
  auto r3 = run_cli("predict --arch " + arch + " --predictor pred.json --out predict.json", d);
  REQUIRE(r3.code == 0);
  CHECK(slurp(d / "predict.json") == first);
}

TEST_CASE("score-space is deterministic and matches the library") {
  const auto& d = pipeline();
  auto hs_path = (data_dir() / "presets/cpu_vnni.json").string();
  auto hs = Hyperspace::load(hs_path);
  auto pred = LatencyPredictor::load(d / "pred.json");
  auto space = decode_space("111111-000000", hs);
  // the low budget screens out most of the pool, the high one accepts all of it
  double t_lo = 2.0 * predict_latency(pred, min_architecture(space), Precision::Int8);
  double t_hi = 1.01 * predict_latency(pred, max_architecture(space), Precision::Int8);
  std::string cmd = "score-space --hyperspace " + hs_path +
                    " --space 111111-000000 --lut lut.csv --predictor pred.json --constraints " +
                    fmt_double(t_lo) + "," + fmt_double(t_hi) +
                    " --num-samples 400 --top-k 5 --seed 9";
  auto r1 = run_cli(cmd, d);
  REQUIRE_MESSAGE(r1.code == 0, r1.output);
  auto j = json::parse(r1.output);
  CHECK(j["space"] == "111111-000000");
  CHECK(j["report"]["total"].get<double>() > 0);
  CHECK(j["cardinality"] == "4107058545104509079680776890330768036352000");
  auto r2 = run_cli(cmd, d);
  CHECK(r1.output == r2.output);

  QtConfig qt;
  qt.constraints = {t_lo, t_hi};
  qt.num_samples = 400;
  qt.top_k = 5;
  qt.seed = 9;
  auto expect = evaluate_qt(space, AccuracyLut::load(d / "lut.csv"), pred, qt);
  CHECK(j["report"]["total"].get<double>() == expect.total);
}

TEST_CASE("evolve-space runs are byte-identical and self-describing") {
  const auto& d = pipeline();
  auto dir = tmp_dir("cli_evolve");
  toy_hyperspace().save(dir / "toy.json");
  auto dev = (data_dir() / "presets/synth_cpu.json").string();
  auto r0 = run_cli("synth --device " + dev + " --hyperspace toy.json --out-lut toy_lut.csv"
                    " --seed 3",
                    dir);
  REQUIRE_MESSAGE(r0.code == 0, r0.output);

  auto hs = toy_hyperspace();
  auto pred = LatencyPredictor::load(d / "pred.json");
  std::vector<double> lats;
  for (const auto& space : enumerate_spaces(hs))
    lats.push_back(predict_latency(pred, min_architecture(space), Precision::Int8));
  std::sort(lats.begin(), lats.end());
  double t1 = lats[lats.size() / 2], t2 = lats[lats.size() - 2];

  std::string cmd = "evolve-space --hyperspace toy.json --lut toy_lut.csv --predictor " +
                    (d / "pred.json").string() + " --total-spaces 40 --population 8" +
                    " --sample-size 3 --constraints " + fmt_double(t1) + "," + fmt_double(t2) +
                    " --num-samples 200 --top-k 3 --seed 5 --with-random-baseline --out-dir ";
  auto r1 = run_cli(cmd + "run1", dir);
  REQUIRE_MESSAGE(r1.code == 0, r1.output);
  auto r2 = run_cli(cmd + "run2", dir);
  REQUIRE_MESSAGE(r2.code == 0, r2.output);

  for (const char* name : {"best_space.json", "evolve_log.jsonl", "curves.json"}) {
    CHECK(slurp(dir / "run1" / name) == slurp(dir / "run2" / name));
    CHECK(!slurp(dir / "run1" / name).empty());
  }
  CHECK(r1.output == r2.output);

  auto best = json::parse(slurp(dir / "run1/best_space.json"));
  // stdout's "<encoding> <score>" matches the artifact
  CHECK(r1.output.find(best["encoding"].get<std::string>() + " ") == 0);
  CHECK(best["evaluations"].get<int>() <= 40);

  auto manifest = json::parse(slurp(dir / "run1/manifest.json"));
  CHECK(manifest["command"] == "evolve-space");
  for (const auto& in : manifest["inputs"])
    if (in["role"] == "hyperspace") CHECK(in["sha256"] == sha256_file(dir / "toy.json"));

  auto curves = json::parse(slurp(dir / "run1/curves.json"));
  CHECK(curves["evolve_curve"].size() == 40);
  CHECK(curves["random_curve"].size() == 40);
}

TEST_CASE("search-models writes the result and its manifest") {
  const auto& d = pipeline();
  auto dir = tmp_dir("cli_search");
  toy_hyperspace().save(dir / "toy.json");
  auto dev = (data_dir() / "presets/synth_cpu.json").string();
  REQUIRE(run_cli("synth --device " + dev + " --hyperspace toy.json --out-lut toy_lut.csv"
                  " --seed 3",
                  dir)
              .code == 0);

  auto hs = toy_hyperspace();
  auto pred = LatencyPredictor::load(d / "pred.json");
  auto space = enumerate_spaces(hs).back();
  std::vector<double> lats;
  for (const auto& arch : qnas::test::enumerate_architectures(space))
    lats.push_back(predict_latency(pred, arch, Precision::Int8));
  std::sort(lats.begin(), lats.end());
  double t = lats[lats.size() * 3 / 4];

  auto r = run_cli("search-models --hyperspace toy.json --space " + space.encode() +
                       " --lut toy_lut.csv --predictor " + (d / "pred.json").string() +
                       " --constraint " + fmt_double(t) +
                       " --budget 150 --population 20 --seed 2 --out result.json",
                   dir);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  auto j = json::parse(slurp(dir / "result.json"));
  CHECK(j["best"]["latency_ms"].get<double>() <= t);
  CHECK(j["best"]["proxy"].get<double>() > 0);
  CHECK(!j["pareto"].empty());
  auto rows = j["best"]["summary"]["rows"];
  CHECK(rows.front()["stage"] == "stem");
  CHECK(rows.back()["stage"] == "head");
  CHECK(std::filesystem::exists(dir / "result.json.manifest.json"));
}

TEST_CASE("failure modes map to distinct exit codes") {
  const auto& d = pipeline();
  auto dir = tmp_dir("cli_errors");
  auto hs_path = (data_dir() / "presets/cpu_vnni.json").string();

  CHECK(run_cli("--version", dir).code == 0);
  CHECK(run_cli("--help", dir).code == 0);
  // usage problems: 2
  CHECK(run_cli("", dir).code == 2);
  CHECK(run_cli("no-such-command", dir).code == 2);
  CHECK(run_cli("predict --arch only.json", dir).code == 2);
  CHECK(run_cli("predict --arch missing.json --predictor also_missing.json", dir).code == 2);
  auto dev = (data_dir() / "presets/synth_cpu.json").string();
  CHECK(run_cli("synth --device " + dev, dir).code == 2);
  // malformed space encoding
  auto bad = run_cli("score-space --hyperspace " + hs_path +
                         " --space 999999-000000 --lut " + (d / "lut.csv").string() +
                         " --predictor " + (d / "pred.json").string() + " --constraints 5",
                     dir);
  CHECK(bad.code == 2);

  // coverage gap: a conv-only predictor cannot price depthwise models
  std::vector<LatencySample> conv_only;
  for (const auto& s : read_samples_csv(d / "samples.csv"))
    if (s.kernel.kind == KernelKind::ConvBnAct) conv_only.push_back(s);
  write_samples_csv(dir / "conv_only.csv", conv_only);
  REQUIRE(run_cli("train-predictor --samples conv_only.csv --out thin.json", dir).code == 0);
  auto arch = (data_dir() / "reference/mobilenet_v2.json").string();
  CHECK(run_cli("predict --arch " + arch + " --predictor thin.json", dir).code == 4);

  // unmeetable constraint
  toy_hyperspace().save(dir / "toy.json");
  REQUIRE(run_cli("synth --device " + dev + " --hyperspace toy.json --out-lut toy_lut.csv"
                  " --seed 3",
                  dir)
              .code == 0);
  auto space_enc = enumerate_spaces(toy_hyperspace()).front().encode();
  auto inf = run_cli("search-models --hyperspace toy.json --space " + space_enc +
                         " --lut toy_lut.csv --predictor " + (d / "pred.json").string() +
                         " --constraint 0.0001 --budget 100 --population 10 --out x.json",
                     dir);
  CHECK(inf.code == 3);
}
