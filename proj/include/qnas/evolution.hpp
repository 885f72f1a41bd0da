#pragma once

#include <deque>
#include <functional>
#include <optional>

#include "qnas/qtscore.hpp"

namespace qnas {

struct EvolutionConfig {
  int total_spaces = 5000;  // total spaces evaluated (N); iterations = (N - P) / 2
  int population = 500;     // P
  int sample_size = 125;    // S
  QtConfig qt;
  uint64_t seed = 0;
  int feasibility_retry_cap = 100;

  void validate() const;
};

struct EvolutionChild {
  std::string mutation;  // "block" | "width"
  std::string encoding;
  double score = 0;
  bool noop = false;  // mutation had no legal move, child equals parent
  int retries = 0;    // feasibility-screen rejections before acceptance
};

struct EvolutionRecord {
  int iteration = 0;  // 0 is the initial population
  std::string parent;
  std::vector<EvolutionChild> children;
  double best_so_far = 0;
};

struct EvolutionLog {
  std::vector<EvolutionRecord> records;
  std::string to_jsonl() const;
  void write(const std::filesystem::path& p) const;
};

// Test/diagnostic instrumentation for the population mechanics.
struct MechanicsProbe {
  std::vector<size_t> population_after_iteration;
  struct Lifetime {
    size_t birth_iteration = 0;
    size_t death_iteration = 0;
    bool initial = false;
    size_t init_position = 0;
  };
  std::vector<Lifetime> deaths;  // in eviction order
};

struct EvolveResult {
  std::string best_encoding;
  double best_score = 0;
  size_t evaluations = 0;  // distinct spaces scored
  std::vector<double> best_curve;  // best-so-far after each evaluation
  EvolutionLog log;
};

// One block-type (or width-window) flip on a uniformly chosen stage that has
// more than one choice; noop when no stage does.
std::pair<SearchSpace, bool> mutate_block_type(const SearchSpace& parent, RngStream& rng);
std::pair<SearchSpace, bool> mutate_width(const SearchSpace& parent, RngStream& rng);

// True when the space's minimal architecture meets the budget at INT8.
bool space_feasible(const SearchSpace& space, const LatencyPredictor& pred, double t_max_ms);

// Aging evolution over search spaces: FIFO population of P, parent = best of
// S uniformly sampled members, two screened children per iteration (one block
// mutation, one width mutation), oldest two evicted. Returns the best over
// every space ever scored.
EvolveResult evolve(const Hyperspace& hs, const EvolutionConfig& cfg, const AccuracyLut& lut,
                    const LatencyPredictor& pred, MechanicsProbe* probe = nullptr);

// Baseline with the same evaluation budget: N uniform spaces, no screening.
EvolveResult random_search(const Hyperspace& hs, const EvolutionConfig& cfg,
                           const AccuracyLut& lut, const LatencyPredictor& pred);

}  // namespace qnas
