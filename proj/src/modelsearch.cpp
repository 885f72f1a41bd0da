#include "qnas/modelsearch.hpp"

#include <algorithm>

#include "qnas/error.hpp"
#include "qnas/util.hpp"

namespace qnas {

void ModelSearchConfig::validate() const {
  if (latency_constraint_ms <= 0) throw BadFormat("model search: latency constraint must be positive");
  if (population < 2) throw BadFormat("model search: population must be >= 2");
  if (budget < population) throw BadFormat("model search: budget must be >= population");
  if (tournament < 1 || tournament > population)
    throw BadFormat("model search: tournament must be in [1, population]");
  if (mutation_rate < 0 || mutation_rate > 1)
    throw BadFormat("model search: mutation rate must be in [0, 1]");
  if (crossover_fraction < 0 || crossover_fraction > 1)
    throw BadFormat("model search: crossover fraction must be in [0, 1]");
}

Architecture mutate_architecture(const Architecture& arch, const SearchSpace& space, double rate,
                                 RngStream& rng) {
  const Hyperspace& hs = space.hyperspace();
  Architecture out = arch;

  if (rng.chance(rate)) out.resolution = rng.pick(hs.resolutions);
  if (rng.chance(rate)) out.stem.conv_width = rng.pick(hs.stem.conv_widths);
  if (rng.chance(rate)) {
    size_t d = static_cast<size_t>(rng.range(hs.stem.block_depth_min, hs.stem.block_depth_max));
    while (out.stem.block_widths.size() > d) out.stem.block_widths.pop_back();
    while (out.stem.block_widths.size() < d)
      out.stem.block_widths.push_back(rng.pick(hs.stem.block_widths));
  }
  for (auto& w : out.stem.block_widths)
    if (rng.chance(rate)) w = rng.pick(hs.stem.block_widths);

  for (size_t i = 0; i < out.stages.size(); ++i) {
    const auto& spec = hs.stages[i];
    const BlockInfo& info = space.stage_block_info(static_cast<int>(i));
    const auto widths = space.stage_widths(static_cast<int>(i));
    auto& stage = out.stages[i];
    auto fresh_layer = [&]() {
      return LayerChoice{rng.pick(spec.kernel_choices), rng.pick(widths),
                         rng.pick(info.expand_ratios)};
    };
    if (rng.chance(rate)) {
      size_t d = static_cast<size_t>(rng.range(spec.depth_min, spec.depth_max));
      while (stage.layers.size() > d) stage.layers.pop_back();
      while (stage.layers.size() < d) stage.layers.push_back(fresh_layer());
    }
    for (auto& l : stage.layers) {
      if (rng.chance(rate)) l.kernel = rng.pick(spec.kernel_choices);
      if (rng.chance(rate)) l.width = rng.pick(widths);
      if (rng.chance(rate)) l.expand = rng.pick(info.expand_ratios);
    }
  }
  return out;
}

Architecture crossover_architecture(const Architecture& a, const Architecture& b, RngStream& rng) {
  Architecture out = a;
  const size_t n = a.stages.size();
  if (n < 2 || b.stages.size() != n) return out;
  size_t cut = 1 + rng.index(n - 1);  // in [1, n-1]: both parents contribute
  for (size_t i = cut; i < n; ++i) out.stages[i] = b.stages[i];
  return out;
}

namespace {

bool fitter(const EvaluatedArch& a, const EvaluatedArch& b) {
  if (a.proxy != b.proxy) return a.proxy > b.proxy;
  if (a.latency_ms != b.latency_ms) return a.latency_ms < b.latency_ms;
  return a.order < b.order;
}

}  // namespace

ModelSearchResult search_models(const SearchSpace& space, const AccuracyLut& lut,
                                const LatencyPredictor& pred, const ModelSearchConfig& cfg) {
  cfg.validate();
  const size_t P = static_cast<size_t>(cfg.population);
  const size_t attempt_cap = 100 * P;
  RngStream rng(mix_seed(cfg.seed, 0x5EA7u));

  ModelSearchResult result;
  std::vector<EvaluatedArch> archive;  // every feasible full evaluation
  size_t evals = 0;

  auto full_eval = [&](Architecture arch, double lat) {
    EvaluatedArch e{std::move(arch), lat, 0.0, evals};
    e.proxy = accuracy_proxy(lut, e.arch, Precision::Int8);
    ++evals;
    archive.push_back(e);
    double best = result.best_curve.empty() ? -1.0 : result.best_curve.back();
    result.best_curve.push_back(std::max(best, e.proxy));
    return e;
  };

  std::vector<EvaluatedArch> population;
  size_t attempts = 0;
  while (population.size() < P && evals < static_cast<size_t>(cfg.budget) &&
         attempts < attempt_cap) {
    ++attempts;
    Architecture cand = sample_architecture(space, rng);
    double lat = predict_latency(pred, cand, Precision::Int8);
    if (lat > cfg.latency_constraint_ms) continue;
    population.push_back(full_eval(std::move(cand), lat));
  }
  if (population.empty())
    throw InfeasibleConstraint("no feasible architecture in " + std::to_string(attempts) +
                               " draws at T=" + fmt_double(cfg.latency_constraint_ms) + "ms");

  while (evals < static_cast<size_t>(cfg.budget)) {
    std::vector<EvaluatedArch> offspring;
    size_t gen_attempts = 0;
    while (offspring.size() < P && evals < static_cast<size_t>(cfg.budget) &&
           gen_attempts < attempt_cap) {
      ++gen_attempts;
      auto tournament = [&]() -> const EvaluatedArch& {
        size_t best = rng.index(population.size());
        for (int t = 1; t < cfg.tournament; ++t) {
          size_t idx = rng.index(population.size());
          if (fitter(population[idx], population[best])) best = idx;
        }
        return population[best];
      };
      const EvaluatedArch& pa = tournament();
      Architecture child;
      if (population.size() >= 2 && rng.chance(cfg.crossover_fraction)) {
        const EvaluatedArch& pb = tournament();
        child = crossover_architecture(pa.arch, pb.arch, rng);
      } else {
        child = pa.arch;
      }
      child = mutate_architecture(child, space, cfg.mutation_rate, rng);
      double lat = predict_latency(pred, child, Precision::Int8);
      if (lat > cfg.latency_constraint_ms) continue;
      offspring.push_back(full_eval(std::move(child), lat));
    }
    if (offspring.empty()) break;  // stagnation: nothing feasible reachable

    // Elitist mu+lambda survival.
    population.insert(population.end(), offspring.begin(), offspring.end());
    std::sort(population.begin(), population.end(), fitter);
    if (population.size() > P) population.resize(P);
  }

  result.best = *std::min_element(archive.begin(), archive.end(),
                                  [](const EvaluatedArch& a, const EvaluatedArch& b) {
                                    return fitter(a, b);
                                  });
  result.pareto = pareto_front(archive);
  result.evaluations = evals;
  return result;
}

std::vector<EvaluatedArch> pareto_front(std::vector<EvaluatedArch> archs) {
  std::sort(archs.begin(), archs.end(), [](const EvaluatedArch& a, const EvaluatedArch& b) {
    if (a.latency_ms != b.latency_ms) return a.latency_ms < b.latency_ms;
    if (a.proxy != b.proxy) return a.proxy > b.proxy;
    return a.order < b.order;
  });
  std::vector<EvaluatedArch> front;
  for (auto& e : archs) {
    if (front.empty() || e.proxy > front.back().proxy) front.push_back(std::move(e));
  }
  return front;
}

}  // namespace qnas
