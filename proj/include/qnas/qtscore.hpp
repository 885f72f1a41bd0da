#pragma once

#include <json.hpp>

#include "qnas/accmodel.hpp"
#include "qnas/archspace.hpp"
#include "qnas/costmodel.hpp"

namespace qnas {

struct QtConfig {
  std::vector<double> constraints;  // latency budgets in ms, ascending
  int num_samples = 5000;
  int top_k = 20;
  uint64_t seed = 0;
  std::vector<double> weights;  // per-constraint; empty means all ones
  int threads = 1;

  void validate() const;
};

struct ScoredArch {
  Architecture arch;
  double latency_ms = 0;
  double proxy = 0;
  size_t sample_index = 0;  // first pool index that produced this architecture
};

struct ConstraintResult {
  double constraint = 0;
  double weight = 1;
  double score = 0;
  int feasible_count = 0;
  std::vector<ScoredArch> top;
};

struct QtReport {
  std::vector<ConstraintResult> per_constraint;
  double total = 0;
  int distinct_archs = 0;

  nlohmann::json to_json(bool include_archs = true) const;
};

// Quality of a search space at a set of latency budgets: per budget, the mean
// accuracy proxy of the best (up to top_k) INT8-feasible distinct
// architectures in a shared uniform sample pool; total is the weighted sum.
QtReport evaluate_qt(const SearchSpace& space, const AccuracyLut& lut,
                     const LatencyPredictor& pred, const QtConfig& cfg);

// The ranked feasible prefix for a single budget.
std::vector<ScoredArch> top_tier(const SearchSpace& space, const AccuracyLut& lut,
                                 const LatencyPredictor& pred, double constraint_ms, int top_k,
                                 uint64_t seed, int num_samples = 5000);

}  // namespace qnas
