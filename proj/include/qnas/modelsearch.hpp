#pragma once

#include "qnas/qtscore.hpp"

namespace qnas {

struct ModelSearchConfig {
  double latency_constraint_ms = 0;
  int budget = 5000;  // full (latency + proxy) evaluations
  int population = 100;
  int tournament = 10;
  double mutation_rate = 0.1;
  double crossover_fraction = 0.5;
  uint64_t seed = 0;

  void validate() const;
};

struct EvaluatedArch {
  Architecture arch;
  double latency_ms = 0;
  double proxy = 0;
  size_t order = 0;  // evaluation sequence number
};

struct ModelSearchResult {
  EvaluatedArch best;
  std::vector<EvaluatedArch> pareto;  // latency ascending, proxy strictly increasing
  size_t evaluations = 0;
  std::vector<double> best_curve;  // best proxy after each full evaluation
};

// Per-gene uniform resampling at the given rate; depth genes resize the stage
// and fresh-sample any layers they add. The result stays inside the space.
Architecture mutate_architecture(const Architecture& arch, const SearchSpace& space, double rate,
                                 RngStream& rng);

// Single-point stage-wise crossover: resolution, stem and stages before the
// cut come from a, the remaining stages from b.
Architecture crossover_architecture(const Architecture& a, const Architecture& b, RngStream& rng);

// Elitist evolutionary search for INT8-efficient architectures inside one
// space. Infeasible candidates are screened on latency alone and do not
// consume budget; 100 x population consecutive screen failures with an empty
// population raise InfeasibleConstraint.
ModelSearchResult search_models(const SearchSpace& space, const AccuracyLut& lut,
                                const LatencyPredictor& pred, const ModelSearchConfig& cfg);

// Non-dominated subset, sorted by latency with strictly increasing proxy.
std::vector<EvaluatedArch> pareto_front(std::vector<EvaluatedArch> archs);

}  // namespace qnas
