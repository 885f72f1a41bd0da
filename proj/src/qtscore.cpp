#include "qnas/qtscore.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "qnas/error.hpp"
#include "qnas/rng.hpp"

namespace qnas {

using nlohmann::json;

void QtConfig::validate() const {
  if (constraints.empty()) throw BadFormat("qt: need at least one latency constraint");
  if (!std::is_sorted(constraints.begin(), constraints.end()))
    throw BadFormat("qt: constraints must be ascending");
  for (double t : constraints)
    if (t <= 0) throw BadFormat("qt: constraints must be positive");
  if (num_samples <= 0) throw BadFormat("qt: num_samples must be positive");
  if (top_k <= 0) throw BadFormat("qt: top_k must be positive");
  if (!weights.empty() && weights.size() != constraints.size())
    throw BadFormat("qt: weights must match constraints");
  for (double w : weights)
    if (w < 0) throw BadFormat("qt: weights must be nonnegative");
  if (threads < 1) throw BadFormat("qt: threads must be >= 1");
}

namespace {

struct PoolEntry {
  Architecture arch;
  std::string identity;
  double latency_ms = 0;
  double proxy = 0;
  size_t sample_index = 0;
};

// Shared sample pool: one arch per pool slot, seeded per index so the pool is
// identical regardless of thread count, deduplicated by canonical identity.
std::vector<PoolEntry> build_pool(const SearchSpace& space, const AccuracyLut& lut,
                                  const LatencyPredictor& pred, const QtConfig& cfg) {
  const size_t n = static_cast<size_t>(cfg.num_samples);
  std::vector<PoolEntry> pool(n);
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto fill = [&](size_t begin, size_t end) {
    try {
      for (size_t i = begin; i < end; ++i) {
        RngStream rng(mix_seed(cfg.seed, 0x51a3u, i));
        PoolEntry e;
        e.arch = sample_architecture(space, rng);
        e.identity = e.arch.describe();
        e.latency_ms = predict_latency(pred, e.arch, Precision::Int8);
        e.proxy = accuracy_proxy(lut, e.arch, Precision::Int8);
        e.sample_index = i;
        pool[i] = std::move(e);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mu);
      if (!failure) failure = std::current_exception();
    }
  };

  const size_t workers = std::min<size_t>(static_cast<size_t>(cfg.threads), n);
  if (workers <= 1) {
    fill(0, n);
  } else {
    std::vector<std::thread> threads;
    const size_t chunk = (n + workers - 1) / workers;
    for (size_t w = 0; w < workers; ++w) {
      size_t begin = w * chunk;
      size_t end = std::min(n, begin + chunk);
      if (begin >= end) break;
      threads.emplace_back(fill, begin, end);
    }
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::unordered_map<std::string, size_t> seen;
  std::vector<PoolEntry> distinct;
  distinct.reserve(n);
  for (auto& e : pool) {
    if (seen.emplace(e.identity, e.sample_index).second) distinct.push_back(std::move(e));
  }
  return distinct;
}

bool rank_before(const PoolEntry& a, const PoolEntry& b) {
  if (a.proxy != b.proxy) return a.proxy > b.proxy;
  if (a.latency_ms != b.latency_ms) return a.latency_ms < b.latency_ms;
  return a.identity < b.identity;
}

}  // namespace

QtReport evaluate_qt(const SearchSpace& space, const AccuracyLut& lut,
                     const LatencyPredictor& pred, const QtConfig& cfg) {
  cfg.validate();
  auto pool = build_pool(space, lut, pred, cfg);
  std::sort(pool.begin(), pool.end(), rank_before);

  QtReport report;
  report.distinct_archs = static_cast<int>(pool.size());
  for (size_t c = 0; c < cfg.constraints.size(); ++c) {
    ConstraintResult res;
    res.constraint = cfg.constraints[c];
    res.weight = cfg.weights.empty() ? 1.0 : cfg.weights[c];
    for (const auto& e : pool) {
      if (e.latency_ms > res.constraint) continue;
      ++res.feasible_count;
      if (static_cast<int>(res.top.size()) < cfg.top_k)
        res.top.push_back({e.arch, e.latency_ms, e.proxy, e.sample_index});
    }
    if (!res.top.empty()) {
      double sum = 0;
      for (const auto& t : res.top) sum += t.proxy;
      res.score = sum / static_cast<double>(res.top.size());
    }
    report.total += res.weight * res.score;
    report.per_constraint.push_back(std::move(res));
  }
  return report;
}

std::vector<ScoredArch> top_tier(const SearchSpace& space, const AccuracyLut& lut,
                                 const LatencyPredictor& pred, double constraint_ms, int top_k,
                                 uint64_t seed, int num_samples) {
  QtConfig cfg;
  cfg.constraints = {constraint_ms};
  cfg.top_k = top_k;
  cfg.seed = seed;
  cfg.num_samples = num_samples;
  auto report = evaluate_qt(space, lut, pred, cfg);
  return std::move(report.per_constraint.front().top);
}

json QtReport::to_json(bool include_archs) const {
  json j;
  j["total"] = total;
  j["distinct_archs"] = distinct_archs;
  json per = json::array();
  for (const auto& c : per_constraint) {
    json cj;
    cj["constraint_ms"] = c.constraint;
    cj["weight"] = c.weight;
    cj["score"] = c.score;
    cj["feasible"] = c.feasible_count;
    json top = json::array();
    for (const auto& t : c.top) {
      json tj;
      tj["latency_ms"] = t.latency_ms;
      tj["proxy"] = t.proxy;
      if (include_archs) tj["arch"] = t.arch.to_json();
      top.push_back(std::move(tj));
    }
    cj["top"] = std::move(top);
    per.push_back(std::move(cj));
  }
  j["per_constraint"] = std::move(per);
  return j;
}

}  // namespace qnas
