#include <CLI11.hpp>
#include <cmath>
#include <iostream>
#include <json.hpp>

#include "qnas/accmodel.hpp"
#include "qnas/archspace.hpp"
#include "qnas/costmodel.hpp"
#include "qnas/error.hpp"
#include "qnas/evolution.hpp"
#include "qnas/manifest.hpp"
#include "qnas/modelsearch.hpp"
#include "qnas/qtscore.hpp"
#include "qnas/util.hpp"
#include "qnas/version.hpp"

namespace {

using namespace qnas;
using nlohmann::json;

// Stage-table rendering of an architecture, one row per segment.
json arch_summary(const Architecture& a) {
  auto join_ints = [](const std::vector<int>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  json rows = json::array();
  rows.push_back({{"stage", "stem"},
                  {"block", "conv" + std::to_string(a.stem.conv_kernel) + "x" +
                                std::to_string(a.stem.conv_kernel)},
                  {"d", 1},
                  {"c", std::to_string(a.stem.conv_width)},
                  {"stride", a.stem.conv_stride},
                  {"act", a.stem.conv_activation}});
  rows.push_back({{"stage", "stem"},
                  {"block", block_name(a.stem.block_type)},
                  {"d", static_cast<int>(a.stem.block_widths.size())},
                  {"c", join_ints(a.stem.block_widths)},
                  {"k", std::to_string(a.stem.block_kernel)},
                  {"e", fmt_double(a.stem.block_expand)},
                  {"stride", 1},
                  {"act", a.stem.block_activation}});
  for (size_t i = 0; i < a.stages.size(); ++i) {
    const auto& s = a.stages[i];
    std::string c, k, e;
    for (size_t j = 0; j < s.layers.size(); ++j) {
      c += (j ? "," : "") + std::to_string(s.layers[j].width);
      k += (j ? "," : "") + std::to_string(s.layers[j].kernel);
      e += (j ? "," : "") + std::string(fmt_double(s.layers[j].expand));
    }
    rows.push_back({{"stage", static_cast<int>(i + 1)},
                    {"block", block_name(s.type)},
                    {"d", static_cast<int>(s.layers.size())},
                    {"c", c},
                    {"k", k},
                    {"e", e},
                    {"stride", s.stride},
                    {"act", s.activation}});
  }
  rows.push_back({{"stage", "head"},
                  {"block", "conv1x1+pool+fc"},
                  {"d", 1},
                  {"c", std::to_string(a.head.feature_dim)},
                  {"act", a.head.activation}});
  json out;
  out["resolution"] = a.resolution;
  out["rows"] = std::move(rows);
  return out;
}

void emit(const json& j, const std::string& out_path) {
  if (out_path.empty())
    std::cout << j.dump(2) << "\n";
  else
    write_file(out_path, j.dump(2) + "\n");
}

struct QtFlags {
  std::vector<double> constraints;
  std::vector<double> weights;
  int num_samples = 5000;
  int top_k = 20;
  uint64_t seed = 0;
  int threads = 1;

  void attach(CLI::App* cmd, bool constraints_required = true) {
    auto* c = cmd->add_option("--constraints", constraints,
                              "latency budgets in ms, ascending")
                  ->delimiter(',');
    if (constraints_required) c->required();
    cmd->add_option("--weights", weights, "per-constraint weights (default: all 1)")
        ->delimiter(',');
    cmd->add_option("--num-samples", num_samples, "sample pool size per space");
    cmd->add_option("--top-k", top_k, "top tier size");
    cmd->add_option("--seed", seed, "rng seed");
    cmd->add_option("--threads", threads, "worker threads for scoring");
  }

  QtConfig config() const {
    QtConfig qt;
    qt.constraints = constraints;
    qt.weights = weights;
    qt.num_samples = num_samples;
    qt.top_k = top_k;
    qt.seed = seed;
    qt.threads = threads;
    return qt;
  }

  json to_json() const {
    return {{"constraints", constraints}, {"weights", weights},
            {"num_samples", num_samples}, {"top_k", top_k},
            {"seed", seed},               {"threads", threads}};
  }
};

int run(int argc, char** argv) {
  CLI::App app{"search-space evolution and model search for INT8-efficient architectures"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kArtifactVersion);

  // ---- synth ----
  auto* synth = app.add_subcommand(
      "synth", "generate synthetic-device latency samples and an accuracy table");
  struct {
    std::string device, out_samples, hyperspace, out_lut;
    uint64_t seed = 0;
    double noise = -1;
  } sy;
  synth->add_option("--device", sy.device, "synthetic device JSON")->required();
  synth->add_option("--out-samples", sy.out_samples, "output latency CSV");
  synth->add_option("--hyperspace", sy.hyperspace, "hyperspace JSON (needed for --out-lut)");
  synth->add_option("--out-lut", sy.out_lut, "output accuracy table CSV");
  synth->add_option("--seed", sy.seed, "rng seed");
  synth->add_option("--noise", sy.noise, "noise fraction override (default: device preset)");
  synth->callback([&] {
    if (sy.out_samples.empty() && sy.out_lut.empty())
      throw BadFormat("synth: nothing to do; pass --out-samples and/or --out-lut");
    auto dev = SyntheticDevice::load(sy.device);
    RunManifest manifest;
    manifest.command = "synth";
    manifest.seed = sy.seed;
    manifest.add_input("device", sy.device);
    double noise = sy.noise >= 0 ? sy.noise : dev.noise_fraction;
    manifest.config = {{"noise", noise}};
    std::string manifest_anchor;
    if (!sy.out_samples.empty()) {
      auto samples = synth_samples(dev, GridSpec::standard(), sy.seed, noise);
      write_samples_csv(sy.out_samples, samples);
      manifest.config["samples"] = static_cast<uint64_t>(samples.size());
      manifest_anchor = sy.out_samples;
    }
    if (!sy.out_lut.empty()) {
      if (sy.hyperspace.empty()) throw BadFormat("synth: --out-lut requires --hyperspace");
      auto hs = Hyperspace::load(sy.hyperspace);
      manifest.add_input("hyperspace", sy.hyperspace);
      auto lut = synth_lut(hs, sy.seed);
      lut.save(sy.out_lut);
      manifest.config["lut_entries"] = static_cast<uint64_t>(lut.size());
      if (manifest_anchor.empty()) manifest_anchor = sy.out_lut;
    }
    manifest.write(manifest_anchor + ".manifest.json");
  });

  // ---- train-predictor ----
  auto* train = app.add_subcommand("train-predictor",
                                   "fit kernel latency tables from a samples CSV");
  struct {
    std::string samples, out, holdout_device, holdout_hyperspace, report;
    int holdout_count = 2000;
    uint64_t holdout_seed = 1;
  } tr;
  train->add_option("--samples", tr.samples, "latency samples CSV")->required();
  train->add_option("--out", tr.out, "output predictor JSON")->required();
  train->add_option("--holdout-device", tr.holdout_device,
                    "synthetic device JSON for a model-level holdout report");
  train->add_option("--holdout-hyperspace", tr.holdout_hyperspace,
                    "hyperspace JSON for the holdout sample distribution");
  train->add_option("--holdout-count", tr.holdout_count, "held-out model count");
  train->add_option("--holdout-seed", tr.holdout_seed, "holdout rng seed");
  train->add_option("--report", tr.report, "write the holdout report JSON here");
  train->callback([&] {
    auto samples = read_samples_csv(tr.samples);
    auto pred = LatencyPredictor::train(samples);
    pred.save(tr.out);
    RunManifest manifest;
    manifest.command = "train-predictor";
    manifest.add_input("samples", tr.samples);
    manifest.config = {{"sample_count", static_cast<uint64_t>(samples.size())}};
    if (!tr.holdout_device.empty()) {
      if (tr.holdout_hyperspace.empty())
        throw BadFormat("train-predictor: --holdout-device requires --holdout-hyperspace");
      auto dev = SyntheticDevice::load(tr.holdout_device);
      auto hs = Hyperspace::load(tr.holdout_hyperspace);
      manifest.add_input("holdout_device", tr.holdout_device);
      manifest.add_input("holdout_hyperspace", tr.holdout_hyperspace);
      manifest.config["holdout_count"] = tr.holdout_count;
      manifest.config["holdout_seed"] = tr.holdout_seed;

      json report;
      report["version"] = kFormatVersion;
      report["type"] = "holdout_report";
      report["device"] = dev.id;
      report["count"] = tr.holdout_count;
      for (Precision p : {Precision::Fp32, Precision::Int8}) {
        int within5 = 0, within10 = 0;
        double sq = 0;
        for (int i = 0; i < tr.holdout_count; ++i) {
          RngStream rng(mix_seed(tr.holdout_seed, 0x407du, static_cast<uint64_t>(i)));
          SearchSpace space = random_space(hs, rng);
          Architecture arch = sample_architecture(space, rng);
          auto kernels = decompose(arch);
          double truth = 0;
          for (const auto& k : kernels) truth += dev.latency(k, p);
          double est = pred.predict_total(kernels, p);
          double rel = (est - truth) / truth;
          if (std::abs(rel) <= 0.05) ++within5;
          if (std::abs(rel) <= 0.10) ++within10;
          sq += rel * rel;
        }
        report[precision_name(p)] = {
            {"within_5pct", static_cast<double>(within5) / tr.holdout_count},
            {"within_10pct", static_cast<double>(within10) / tr.holdout_count},
            {"rmse_rel", std::sqrt(sq / tr.holdout_count)}};
      }
      emit(report, tr.report);
    }
    manifest.write(tr.out + ".manifest.json");
  });

  // ---- predict ----
  auto* predict = app.add_subcommand("predict", "predict a model's latency");
  struct {
    std::string arch, predictor, precision = "both", out;
  } pr;
  predict->add_option("--arch", pr.arch, "architecture JSON")->required();
  predict->add_option("--predictor", pr.predictor, "predictor JSON")->required();
  predict->add_option("--precision", pr.precision, "int8 | fp32 | both")
      ->check(CLI::IsMember({"int8", "fp32", "both"}));
  predict->add_option("--out", pr.out, "write the prediction JSON here (default: stdout)");
  predict->callback([&] {
    auto arch = Architecture::load(pr.arch);
    auto pred = LatencyPredictor::load(pr.predictor);
    json j;
    j["version"] = kFormatVersion;
    j["type"] = "latency_prediction";
    j["flops_macs"] = flops(arch);
    if (pr.precision == "int8" || pr.precision == "both")
      j["int8_ms"] = predict_latency(pred, arch, Precision::Int8);
    if (pr.precision == "fp32" || pr.precision == "both")
      j["fp32_ms"] = predict_latency(pred, arch, Precision::Fp32);
    if (pr.precision == "both")
      j["int8_speedup"] = j["fp32_ms"].get<double>() / j["int8_ms"].get<double>();
    emit(j, pr.out);
    if (!pr.out.empty()) {
      RunManifest manifest;
      manifest.command = "predict";
      manifest.add_input("arch", pr.arch);
      manifest.add_input("predictor", pr.predictor);
      manifest.config = {{"precision", pr.precision}};
      manifest.write(pr.out + ".manifest.json");
    }
  });

  // ---- score-space ----
  auto* score = app.add_subcommand("score-space", "quality score of one search space");
  struct {
    std::string hyperspace, space, lut, predictor, out;
  } sc;
  QtFlags sc_qt;
  score->add_option("--hyperspace", sc.hyperspace, "hyperspace JSON")->required();
  score->add_option("--space", sc.space, "space encoding, e.g. 111111-000000")->required();
  score->add_option("--lut", sc.lut, "accuracy table CSV")->required();
  score->add_option("--predictor", sc.predictor, "predictor JSON")->required();
  sc_qt.attach(score);
  score->add_option("--out", sc.out, "write the report JSON here (default: stdout)");
  score->callback([&] {
    auto hs = Hyperspace::load(sc.hyperspace);
    auto space = decode_space(sc.space, hs);
    auto lut = AccuracyLut::load(sc.lut);
    auto pred = LatencyPredictor::load(sc.predictor);
    auto report = evaluate_qt(space, lut, pred, sc_qt.config());
    json j;
    j["version"] = kFormatVersion;
    j["type"] = "qt_report";
    j["hyperspace"] = hs.id;
    j["space"] = space.encode();
    j["cardinality"] = space_cardinality(space).str();
    j["config"] = sc_qt.to_json();
    j["report"] = report.to_json();
    emit(j, sc.out);
    if (!sc.out.empty()) {
      RunManifest manifest;
      manifest.command = "score-space";
      manifest.seed = sc_qt.seed;
      manifest.add_input("hyperspace", sc.hyperspace);
      manifest.add_input("lut", sc.lut);
      manifest.add_input("predictor", sc.predictor);
      manifest.config = sc_qt.to_json();
      manifest.config["space"] = sc.space;
      manifest.write(sc.out + ".manifest.json");
    }
  });

  // ---- evolve-space ----
  auto* evo = app.add_subcommand("evolve-space",
                                 "evolve the hyperspace toward a quantization-friendly space");
  struct {
    std::string hyperspace, lut, predictor, out_dir;
    int total_spaces = 5000;
    int population = 500;
    int sample_size = 125;
    int retry_cap = 100;
    bool with_random_baseline = false;
  } ev;
  QtFlags ev_qt;
  evo->add_option("--hyperspace", ev.hyperspace, "hyperspace JSON")->required();
  evo->add_option("--lut", ev.lut, "accuracy table CSV")->required();
  evo->add_option("--predictor", ev.predictor, "predictor JSON")->required();
  evo->add_option("--out-dir", ev.out_dir, "output directory")->required();
  evo->add_option("--total-spaces", ev.total_spaces, "total spaces to evaluate (N)");
  evo->add_option("--population", ev.population, "population size (P)");
  evo->add_option("--sample-size", ev.sample_size, "parent sample size (S)");
  evo->add_option("--retry-cap", ev.retry_cap, "feasibility screen retry cap");
  evo->add_flag("--with-random-baseline", ev.with_random_baseline,
                "also run the random-search baseline and write the curves");
  ev_qt.attach(evo);
  evo->callback([&] {
    auto hs = Hyperspace::load(ev.hyperspace);
    auto lut = AccuracyLut::load(ev.lut);
    auto pred = LatencyPredictor::load(ev.predictor);
    EvolutionConfig cfg;
    cfg.total_spaces = ev.total_spaces;
    cfg.population = ev.population;
    cfg.sample_size = ev.sample_size;
    cfg.feasibility_retry_cap = ev.retry_cap;
    cfg.qt = ev_qt.config();
    cfg.seed = ev_qt.seed;

    auto result = evolve(hs, cfg, lut, pred);
    std::filesystem::path dir(ev.out_dir);
    std::filesystem::create_directories(dir);

    auto best_space = decode_space(result.best_encoding, hs);
    auto best_report = evaluate_qt(best_space, lut, pred, cfg.qt);
    json best;
    best["version"] = kFormatVersion;
    best["type"] = "evolved_space";
    best["hyperspace"] = hs.id;
    best["encoding"] = result.best_encoding;
    best["score"] = result.best_score;
    best["evaluations"] = static_cast<uint64_t>(result.evaluations);
    best["cardinality"] = space_cardinality(best_space).str();
    best["qt_report"] = best_report.to_json();
    write_file(dir / "best_space.json", best.dump(2) + "\n");
    result.log.write(dir / "evolve_log.jsonl");

    if (ev.with_random_baseline) {
      auto baseline = random_search(hs, cfg, lut, pred);
      json curves;
      curves["version"] = kFormatVersion;
      curves["type"] = "search_curves";
      curves["evolve_best"] = result.best_score;
      curves["random_best"] = baseline.best_score;
      curves["evolve_curve"] = result.best_curve;
      curves["random_curve"] = baseline.best_curve;
      write_file(dir / "curves.json", curves.dump(2) + "\n");
    }

    RunManifest manifest;
    manifest.command = "evolve-space";
    manifest.seed = cfg.seed;
    manifest.add_input("hyperspace", ev.hyperspace);
    manifest.add_input("lut", ev.lut);
    manifest.add_input("predictor", ev.predictor);
    manifest.config = ev_qt.to_json();
    manifest.config["total_spaces"] = ev.total_spaces;
    manifest.config["population"] = ev.population;
    manifest.config["sample_size"] = ev.sample_size;
    manifest.config["retry_cap"] = ev.retry_cap;
    manifest.config["with_random_baseline"] = ev.with_random_baseline;
    manifest.write(dir / "manifest.json");
    std::cout << result.best_encoding << " " << fmt_double(result.best_score) << "\n";
  });

  // ---- search-models ----
  auto* search = app.add_subcommand("search-models",
                                    "search one space for INT8-efficient architectures");
  struct {
    std::string hyperspace, space, lut, predictor, out;
    double constraint = 0;
    int budget = 5000;
    int population = 100;
    int tournament = 10;
    double mutation_rate = 0.1;
    double crossover = 0.5;
    uint64_t seed = 0;
  } ms;
  search->add_option("--hyperspace", ms.hyperspace, "hyperspace JSON")->required();
  search->add_option("--space", ms.space, "space encoding")->required();
  search->add_option("--lut", ms.lut, "accuracy table CSV")->required();
  search->add_option("--predictor", ms.predictor, "predictor JSON")->required();
  search->add_option("--constraint", ms.constraint, "latency budget in ms")->required();
  search->add_option("--budget", ms.budget, "full evaluation budget");
  search->add_option("--population", ms.population, "population size");
  search->add_option("--tournament", ms.tournament, "tournament size");
  search->add_option("--mutation-rate", ms.mutation_rate, "per-gene mutation rate");
  search->add_option("--crossover", ms.crossover, "crossover fraction");
  search->add_option("--seed", ms.seed, "rng seed");
  search->add_option("--out", ms.out, "output JSON")->required();
  search->callback([&] {
    auto hs = Hyperspace::load(ms.hyperspace);
    auto space = decode_space(ms.space, hs);
    auto lut = AccuracyLut::load(ms.lut);
    auto pred = LatencyPredictor::load(ms.predictor);
    ModelSearchConfig cfg;
    cfg.latency_constraint_ms = ms.constraint;
    cfg.budget = ms.budget;
    cfg.population = ms.population;
    cfg.tournament = ms.tournament;
    cfg.mutation_rate = ms.mutation_rate;
    cfg.crossover_fraction = ms.crossover;
    cfg.seed = ms.seed;
    auto result = search_models(space, lut, pred, cfg);

    json j;
    j["version"] = kFormatVersion;
    j["type"] = "model_search_result";
    j["hyperspace"] = hs.id;
    j["space"] = space.encode();
    j["constraint_ms"] = ms.constraint;
    j["evaluations"] = static_cast<uint64_t>(result.evaluations);
    j["best"] = {{"latency_ms", result.best.latency_ms},
                 {"proxy", result.best.proxy},
                 {"summary", arch_summary(result.best.arch)},
                 {"arch", result.best.arch.to_json()}};
    json pareto = json::array();
    for (const auto& e : result.pareto)
      pareto.push_back({{"latency_ms", e.latency_ms},
                        {"proxy", e.proxy},
                        {"arch", e.arch.to_json()}});
    j["pareto"] = std::move(pareto);
    write_file(ms.out, j.dump(2) + "\n");

    RunManifest manifest;
    manifest.command = "search-models";
    manifest.seed = ms.seed;
    manifest.add_input("hyperspace", ms.hyperspace);
    manifest.add_input("lut", ms.lut);
    manifest.add_input("predictor", ms.predictor);
    manifest.config = {{"space", ms.space},
                       {"constraint_ms", ms.constraint},
                       {"budget", ms.budget},
                       {"population", ms.population},
                       {"tournament", ms.tournament},
                       {"mutation_rate", ms.mutation_rate},
                       {"crossover", ms.crossover}};
    manifest.write(ms.out + ".manifest.json");
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::Usage);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const qnas::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return static_cast<int>(qnas::ExitCode::Internal);
  }
}
