#include "qnas/evolution.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

#include "qnas/error.hpp"
#include "qnas/util.hpp"

namespace qnas {

using nlohmann::json;

void EvolutionConfig::validate() const {
  if (population < 2) throw BadFormat("evolution: population must be >= 2");
  if (sample_size < 1 || sample_size > population)
    throw BadFormat("evolution: sample_size must be in [1, population]");
  if (total_spaces < population)
    throw BadFormat("evolution: total_spaces must be >= population");
  if (feasibility_retry_cap < 1) throw BadFormat("evolution: retry cap must be >= 1");
  qt.validate();
}

namespace {

std::pair<SearchSpace, bool> mutate_one(const SearchSpace& parent, RngStream& rng, bool block) {
  const Hyperspace& hs = parent.hyperspace();
  const size_t n = hs.stages.size();
  // Visit stages in random order; the first with an alternative gets flipped.
  auto order = rng.sample_indices(n, n);
  for (size_t stage : order) {
    const size_t choices = block ? hs.stages[stage].block_choices.size()
                                 : static_cast<size_t>(hs.stages[stage].window_count());
    if (choices < 2) continue;
    const int current = block ? parent.block_index()[stage] : parent.width_start()[stage];
    // Uniform over the other choices.
    int pick = static_cast<int>(rng.index(choices - 1));
    if (pick >= current) ++pick;
    auto blocks = parent.block_index();
    auto widths = parent.width_start();
    (block ? blocks[stage] : widths[stage]) = pick;
    return {SearchSpace(hs, std::move(blocks), std::move(widths)), false};
  }
  return {parent, true};
}

}  // namespace

std::pair<SearchSpace, bool> mutate_block_type(const SearchSpace& parent, RngStream& rng) {
  return mutate_one(parent, rng, true);
}

std::pair<SearchSpace, bool> mutate_width(const SearchSpace& parent, RngStream& rng) {
  return mutate_one(parent, rng, false);
}

bool space_feasible(const SearchSpace& space, const LatencyPredictor& pred, double t_max_ms) {
  return predict_latency(pred, min_architecture(space), Precision::Int8) <= t_max_ms;
}

namespace {

struct Individual {
  SearchSpace space;
  std::string encoding;
  double score = 0;
  size_t birth_iteration = 0;
  size_t birth_order = 0;
  bool initial = false;
  size_t init_position = 0;
};

class Scorer {
 public:
  Scorer(const AccuracyLut& lut, const LatencyPredictor& pred, const QtConfig& qt)
      : lut_(lut), pred_(pred), qt_(qt) {}

  double score(const SearchSpace& space, const std::string& encoding) {
    auto it = cache_.find(encoding);
    if (it != cache_.end()) return it->second;
    double s = evaluate_qt(space, lut_, pred_, qt_).total;
    cache_.emplace(encoding, s);
    return s;
  }

  size_t evaluations() const { return cache_.size(); }

 private:
  const AccuracyLut& lut_;
  const LatencyPredictor& pred_;
  QtConfig qt_;
  std::unordered_map<std::string, double> cache_;
};

class FeasibilityCache {
 public:
  FeasibilityCache(const LatencyPredictor& pred, double t_max) : pred_(pred), t_max_(t_max) {}

  bool feasible(const SearchSpace& space, const std::string& encoding) {
    auto it = cache_.find(encoding);
    if (it != cache_.end()) return it->second;
    bool ok = space_feasible(space, pred_, t_max_);
    cache_.emplace(encoding, ok);
    return ok;
  }

 private:
  const LatencyPredictor& pred_;
  double t_max_;
  std::unordered_map<std::string, bool> cache_;
};

}  // namespace

EvolveResult evolve(const Hyperspace& hs, const EvolutionConfig& cfg, const AccuracyLut& lut,
                    const LatencyPredictor& pred, MechanicsProbe* probe) {
  cfg.validate();
  const size_t P = static_cast<size_t>(cfg.population);
  const size_t S = static_cast<size_t>(cfg.sample_size);
  const size_t iterations = (static_cast<size_t>(cfg.total_spaces) - P) / 2;
  const double t_max = cfg.qt.constraints.back();

  Scorer scorer(lut, pred, cfg.qt);
  FeasibilityCache screen(pred, t_max);

  EvolveResult result;
  double best = -1;
  std::string best_encoding;
  auto note_eval = [&](const std::string& encoding, double score) {
    if (score > best) {
      best = score;
      best_encoding = encoding;
    }
    result.best_curve.push_back(best);
  };

  std::deque<Individual> population;
  size_t birth_counter = 0;

  for (size_t j = 0; j < P; ++j) {
    RngStream rng(mix_seed(cfg.seed, 0xA111u, j));
    std::optional<SearchSpace> space;
    std::string encoding;
    for (int attempt = 0; attempt < cfg.feasibility_retry_cap; ++attempt) {
      SearchSpace cand = random_space(hs, rng);
      encoding = cand.encode();
      if (screen.feasible(cand, encoding)) {
        space = std::move(cand);
        break;
      }
    }
    if (!space)
      throw InfeasibleConstraint("no feasible space found in " +
                                 std::to_string(cfg.feasibility_retry_cap) +
                                 " draws at t_max=" + fmt_double(t_max) + "ms");
    Individual ind{*space, encoding, scorer.score(*space, encoding), 0, birth_counter++, true, j};
    note_eval(ind.encoding, ind.score);
    population.push_back(std::move(ind));
  }
  result.log.records.push_back({0, "", {}, best});

  for (size_t it = 1; it <= iterations; ++it) {
    RngStream rng(mix_seed(cfg.seed, 0x17e2u, it));
    auto sampled = rng.sample_indices(P, S);
    size_t parent_idx = sampled.front();
    for (size_t idx : sampled) {
      const auto& cand = population[idx];
      const auto& cur = population[parent_idx];
      if (cand.score > cur.score ||
          (cand.score == cur.score && cand.birth_order < cur.birth_order))
        parent_idx = idx;
    }
    // The parent individual survives by value; evictions below may drop it.
    Individual parent = population[parent_idx];

    EvolutionRecord record;
    record.iteration = static_cast<int>(it);
    record.parent = parent.encoding;

    for (bool block : {true, false}) {
      EvolutionChild child;
      child.mutation = block ? "block" : "width";
      SearchSpace cand = parent.space;
      std::string encoding = parent.encoding;
      bool noop = true;
      int retries = 0;
      for (int attempt = 0; attempt < cfg.feasibility_retry_cap; ++attempt) {
        auto [mutated, was_noop] = mutate_one(parent.space, rng, block);
        std::string enc = mutated.encode();
        if (was_noop || screen.feasible(mutated, enc)) {
          cand = std::move(mutated);
          encoding = std::move(enc);
          noop = was_noop;
          break;
        }
        ++retries;
      }
      // If every mutation was rejected, cand still holds the parent: a no-op
      // child that passed the screen when it entered the population.
      child.encoding = encoding;
      child.noop = noop;
      child.retries = retries;
      child.score = scorer.score(cand, encoding);
      note_eval(encoding, child.score);
      population.push_back(
          {std::move(cand), child.encoding, child.score, it, birth_counter++, false, 0});
      record.children.push_back(std::move(child));
    }

    for (int evict = 0; evict < 2; ++evict) {
      if (probe)
        probe->deaths.push_back({population.front().birth_iteration, it,
                                 population.front().initial, population.front().init_position});
      population.pop_front();
    }
    if (probe) probe->population_after_iteration.push_back(population.size());

    record.best_so_far = best;
    result.log.records.push_back(std::move(record));
  }

  result.best_encoding = best_encoding;
  result.best_score = best;
  result.evaluations = scorer.evaluations();
  return result;
}

EvolveResult random_search(const Hyperspace& hs, const EvolutionConfig& cfg,
                           const AccuracyLut& lut, const LatencyPredictor& pred) {
  cfg.validate();
  Scorer scorer(lut, pred, cfg.qt);
  EvolveResult result;
  double best = -1;
  for (int i = 0; i < cfg.total_spaces; ++i) {
    RngStream rng(mix_seed(cfg.seed, 0xBA5Eu, static_cast<uint64_t>(i)));
    SearchSpace space = random_space(hs, rng);
    std::string encoding = space.encode();
    double score = scorer.score(space, encoding);
    if (score > best) {
      best = score;
      result.best_encoding = encoding;
    }
    result.best_curve.push_back(best);
  }
  result.best_score = best;
  result.evaluations = scorer.evaluations();
  return result;
}

std::string EvolutionLog::to_jsonl() const {
  std::ostringstream os;
  for (const auto& r : records) {
    json j;
    j["iteration"] = r.iteration;
    j["parent"] = r.parent;
    json children = json::array();
    for (const auto& c : r.children) {
      children.push_back({{"mutation", c.mutation},
                          {"encoding", c.encoding},
                          {"score", c.score},
                          {"noop", c.noop},
                          {"retries", c.retries}});
    }
    j["children"] = std::move(children);
    j["best_so_far"] = r.best_so_far;
    os << j.dump() << "\n";
  }
  return os.str();
}

void EvolutionLog::write(const std::filesystem::path& p) const { write_file(p, to_jsonl()); }

}  // namespace qnas
