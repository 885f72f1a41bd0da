#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "qnas/costmodel.hpp"
#include "qnas/error.hpp"
#include "qnas/util.hpp"
#include "qnas/version.hpp"

namespace qnas {

using nlohmann::json;

namespace {

// Per-axis bracket for multilinear interpolation, clamped at the edges.
struct AxisPos {
  size_t lo, hi;
  double t;
};

AxisPos locate(const std::vector<double>& axis, double q) {
  if (axis.size() == 1 || q <= axis.front()) return {0, 0, 0.0};
  if (q >= axis.back()) return {axis.size() - 1, axis.size() - 1, 0.0};
  auto it = std::lower_bound(axis.begin(), axis.end(), q);
  size_t hi = static_cast<size_t>(it - axis.begin());
  if (axis[hi] == q) return {hi, hi, 0.0};
  size_t lo = hi - 1;
  return {lo, hi, (q - axis[lo]) / (axis[hi] - axis[lo])};
}

}  // namespace

double LatencyPredictor::Table::lookup(double hw_q, double cin_q, double cout_q, double k_q) const {
  const AxisPos p0 = locate(hw, hw_q);
  const AxisPos p1 = locate(cin, cin_q);
  const AxisPos p2 = locate(cout, cout_q);
  const AxisPos p3 = locate(k, k_q);
  const size_t s3 = k.size(), s2 = cout.size() * s3, s1 = cin.size() * s2;
  double acc = 0;
  for (int b = 0; b < 16; ++b) {
    const bool u0 = b & 1, u1 = b & 2, u2 = b & 4, u3 = b & 8;
    double w = (u0 ? p0.t : 1 - p0.t) * (u1 ? p1.t : 1 - p1.t) * (u2 ? p2.t : 1 - p2.t) *
               (u3 ? p3.t : 1 - p3.t);
    if (w == 0) continue;
    size_t idx = (u0 ? p0.hi : p0.lo) * s1 + (u1 ? p1.hi : p1.lo) * s2 +
                 (u2 ? p2.hi : p2.lo) * s3 + (u3 ? p3.hi : p3.lo);
    acc += w * values[idx];
  }
  return acc;
}

LatencyPredictor LatencyPredictor::train(const std::vector<LatencySample>& samples,
                                         const std::string& device_id) {
  LatencyPredictor pred;
  pred.device_id_ = device_id;

  std::map<std::tuple<int, int, std::string>, std::vector<const LatencySample*>> groups;
  for (const auto& s : samples)
    groups[{static_cast<int>(s.kernel.kind), static_cast<int>(s.precision), s.kernel.activation}]
        .push_back(&s);

  for (const auto& [key, group] : groups) {
    Table t;
    std::set<double> hw_s, cin_s, cout_s, k_s;
    for (const auto* s : group) {
      hw_s.insert(static_cast<double>(s->kernel.h) * s->kernel.w);
      cin_s.insert(s->kernel.cin);
      cout_s.insert(s->kernel.cout);
      k_s.insert(s->kernel.k);
    }
    t.hw.assign(hw_s.begin(), hw_s.end());
    t.cin.assign(cin_s.begin(), cin_s.end());
    t.cout.assign(cout_s.begin(), cout_s.end());
    t.k.assign(k_s.begin(), k_s.end());

    const size_t s3 = t.k.size(), s2 = t.cout.size() * s3, s1 = t.cin.size() * s2;
    const size_t n = t.hw.size() * s1;
    std::vector<double> sum(n, 0.0);
    std::vector<int> count(n, 0);
    auto axis_index = [](const std::vector<double>& axis, double v) {
      return static_cast<size_t>(std::lower_bound(axis.begin(), axis.end(), v) - axis.begin());
    };
    for (const auto* s : group) {
      size_t idx = axis_index(t.hw, static_cast<double>(s->kernel.h) * s->kernel.w) * s1 +
                   axis_index(t.cin, s->kernel.cin) * s2 +
                   axis_index(t.cout, s->kernel.cout) * s3 + axis_index(t.k, s->kernel.k);
      sum[idx] += s->latency_ms;
      count[idx] += 1;
    }
    t.values.assign(n, std::numeric_limits<double>::quiet_NaN());
    std::vector<size_t> filled;
    for (size_t i = 0; i < n; ++i) {
      if (count[i] > 0) {
        t.values[i] = sum[i] / count[i];  // repeated measurements average
        filled.push_back(i);
      }
    }
    // Fill unsampled cells from the nearest sampled cell in index space
    // (L1 distance, ties broken by lowest flat index).
    if (filled.size() < n) {
      auto unflatten = [&](size_t idx, size_t c[4]) {
        c[0] = idx / s1;
        c[1] = (idx % s1) / s2;
        c[2] = (idx % s2) / s3;
        c[3] = idx % s3;
      };
      for (size_t i = 0; i < n; ++i) {
        if (count[i] > 0) continue;
        size_t ci[4], cf[4];
        unflatten(i, ci);
        size_t best_dist = std::numeric_limits<size_t>::max();
        size_t best_idx = 0;
        for (size_t f : filled) {
          unflatten(f, cf);
          size_t dist = 0;
          for (int a = 0; a < 4; ++a)
            dist += ci[a] > cf[a] ? ci[a] - cf[a] : cf[a] - ci[a];
          if (dist < best_dist) {
            best_dist = dist;
            best_idx = f;
          }
        }
        t.values[i] = t.values[best_idx];
      }
    }
    pred.tables_.emplace(key, std::move(t));
  }
  return pred;
}

double LatencyPredictor::predict(const Kernel& kernel, Precision p) const {
  const auto kind = static_cast<int>(kernel.kind);
  const auto prec = static_cast<int>(p);
  auto it = tables_.find({kind, prec, kernel.activation});
  if (it == tables_.end()) {
    // Unseen activation: fall back to the kind's first table of this
    // precision so sparse campaigns still cover every query.
    it = tables_.lower_bound({kind, prec, std::string()});
    if (it == tables_.end() || std::get<0>(it->first) != kind || std::get<1>(it->first) != prec)
      throw InsufficientSamples(kernel_kind_name(kernel.kind),
                                "precision " + precision_name(p));
  }
  return it->second.lookup(static_cast<double>(kernel.h) * kernel.w, kernel.cin, kernel.cout,
                           kernel.k);
}

double LatencyPredictor::predict_total(std::span<const Kernel> kernels, Precision p) const {
  double total = 0;
  for (const auto& k : kernels) total += predict(k, p);
  return total;
}

json LatencyPredictor::to_json() const {
  json j;
  j["version"] = kFormatVersion;
  j["type"] = "latency_predictor";
  j["device"] = device_id_;
  json tables = json::array();
  for (const auto& [key, t] : tables_) {
    json tj;
    tj["kind"] = kernel_kind_name(static_cast<KernelKind>(std::get<0>(key)));
    tj["precision"] = precision_name(static_cast<Precision>(std::get<1>(key)));
    tj["activation"] = std::get<2>(key);
    tj["hw"] = t.hw;
    tj["cin"] = t.cin;
    tj["cout"] = t.cout;
    tj["k"] = t.k;
    tj["values"] = t.values;
    tables.push_back(std::move(tj));
  }
  j["tables"] = std::move(tables);
  return j;
}

LatencyPredictor LatencyPredictor::from_json(const json& j) {
  if (!j.is_object() || !j.contains("version")) throw BadFormat("predictor: expected JSON object with version");
  int v = j.at("version").get<int>();
  if (v != kFormatVersion) throw UnsupportedVersion("predictor", v);
  if (j.value("type", "") != "latency_predictor") throw BadFormat("predictor: wrong type tag");
  LatencyPredictor pred;
  pred.device_id_ = j.value("device", "");
  for (const auto& tj : j.at("tables")) {
    Table t;
    t.hw = tj.at("hw").get<std::vector<double>>();
    t.cin = tj.at("cin").get<std::vector<double>>();
    t.cout = tj.at("cout").get<std::vector<double>>();
    t.k = tj.at("k").get<std::vector<double>>();
    t.values = tj.at("values").get<std::vector<double>>();
    if (t.values.size() != t.cells()) throw BadFormat("predictor: table size mismatch");
    for (const auto* axis : {&t.hw, &t.cin, &t.cout, &t.k})
      if (axis->empty() || !std::is_sorted(axis->begin(), axis->end()))
        throw BadFormat("predictor: axes must be nonempty ascending");
    int kind = static_cast<int>(kernel_kind_from_name(tj.at("kind").get<std::string>()));
    int prec = static_cast<int>(precision_from_name(tj.at("precision").get<std::string>()));
    pred.tables_.emplace(std::make_tuple(kind, prec, tj.at("activation").get<std::string>()),
                         std::move(t));
  }
  return pred;
}

void LatencyPredictor::save(const std::filesystem::path& p) const {
  write_file(p, to_json().dump() + "\n");
}

LatencyPredictor LatencyPredictor::load(const std::filesystem::path& p) {
  json j;
  try {
    j = json::parse(read_file(p));
  } catch (const json::exception& e) {
    throw BadFormat(p.string() + ": " + e.what());
  }
  return from_json(j);
}

double predict_latency(const LatencyPredictor& pred, const Architecture& arch, Precision p) {
  const auto kernels = decompose(arch);
  return pred.predict_total(kernels, p);
}

}  // namespace qnas
