#include <cmath>
#include <sstream>

#include "qnas/costmodel.hpp"
#include "qnas/error.hpp"
#include "qnas/rng.hpp"
#include "qnas/util.hpp"
#include "qnas/version.hpp"

namespace qnas {

using nlohmann::json;

SyntheticDevice SyntheticDevice::from_json(const json& j) {
  if (!j.is_object() || !j.contains("version")) throw BadFormat("device: expected JSON object with version");
  int v = j.at("version").get<int>();
  if (v != kFormatVersion) throw UnsupportedVersion("device", v);
  SyntheticDevice d;
  d.id = j.at("id").get<std::string>();
  d.granularity_int8 = j.at("granularity_int8").get<int>();
  d.granularity_fp32 = j.at("granularity_fp32").get<int>();
  d.overhead_ms = j.at("overhead_ms").get<double>();
  d.noise_fraction = j.at("noise_fraction").get<double>();
  for (const auto& [name, val] : j.at("throughput_per_ms").items()) {
    kernel_kind_from_name(name);  // reject unknown kinds
    d.throughput_per_ms[name] = val.get<double>();
  }
  for (const auto& [name, val] : j.at("int8_speedup").items()) {
    if (name == "activation_only") {
      for (const auto& [act, s] : val.items()) d.activation_speedup[act] = s.get<double>();
    } else if (val.is_object()) {
      kernel_kind_from_name(name);
      for (const auto& [kstr, s] : val.items()) d.k_speedup[name][std::stoi(kstr)] = s.get<double>();
    } else {
      kernel_kind_from_name(name);
      d.kind_speedup[name] = val.get<double>();
    }
  }
  if (d.granularity_int8 <= 0 || d.granularity_fp32 <= 0)
    throw BadFormat("device: granularities must be positive");
  if (d.noise_fraction < 0 || d.noise_fraction > 0.5)
    throw BadFormat("device: noise_fraction out of range");
  for (int i = 0; i < kNumKernelKinds; ++i) {
    const auto& name = kernel_kind_name(static_cast<KernelKind>(i));
    if (!d.throughput_per_ms.count(name) || d.throughput_per_ms.at(name) <= 0)
      throw BadFormat("device: missing or non-positive throughput for " + name);
  }
  return d;
}

SyntheticDevice SyntheticDevice::load(const std::filesystem::path& p) {
  json j;
  try {
    j = json::parse(read_file(p));
  } catch (const json::exception& e) {
    throw BadFormat(p.string() + ": " + e.what());
  }
  return from_json(j);
}

json SyntheticDevice::to_json() const {
  json j;
  j["version"] = kFormatVersion;
  j["id"] = id;
  j["granularity_int8"] = granularity_int8;
  j["granularity_fp32"] = granularity_fp32;
  j["overhead_ms"] = overhead_ms;
  j["noise_fraction"] = noise_fraction;
  j["throughput_per_ms"] = throughput_per_ms;
  json sp = json::object();
  for (const auto& [name, curve] : k_speedup) {
    json c = json::object();
    for (const auto& [k, s] : curve) c[std::to_string(k)] = s;
    sp[name] = std::move(c);
  }
  for (const auto& [name, s] : kind_speedup) sp[name] = s;
  if (!activation_speedup.empty()) {
    json a = json::object();
    for (const auto& [act, s] : activation_speedup) a[act] = s;
    sp["activation_only"] = std::move(a);
  }
  j["int8_speedup"] = std::move(sp);
  return j;
}

int SyntheticDevice::effective_channels(int c, Precision p) const {
  return round_up(c, p == Precision::Int8 ? granularity_int8 : granularity_fp32);
}

double SyntheticDevice::int8_speedup(const Kernel& kr) const {
  const auto& name = kernel_kind_name(kr.kind);
  if (kr.kind == KernelKind::ActivationOnly) {
    auto it = activation_speedup.find(kr.activation);
    if (it == activation_speedup.end())
      throw BadFormat("device '" + id + "': no int8 speedup for activation '" + kr.activation + "'");
    return it->second;
  }
  auto curve_it = k_speedup.find(name);
  if (curve_it != k_speedup.end()) {
    const auto& curve = curve_it->second;
    // Linear interpolation over kernel size, clamped at curve ends.
    auto hi = curve.lower_bound(kr.k);
    if (hi == curve.end()) return std::prev(curve.end())->second;
    if (hi->first == kr.k || hi == curve.begin()) return hi->second;
    auto lo = std::prev(hi);
    double t = double(kr.k - lo->first) / double(hi->first - lo->first);
    return lo->second + t * (hi->second - lo->second);
  }
  auto it = kind_speedup.find(name);
  if (it == kind_speedup.end())
    throw BadFormat("device '" + id + "': no int8 speedup for kind " + name);
  return it->second;
}

double SyntheticDevice::latency(const Kernel& kr, Precision p) const {
  const double ec_in = effective_channels(kr.cin, p);
  const double ec_out = effective_channels(kr.cout, p);
  const double hw = static_cast<double>(kr.h) * kr.w;
  const double kk = static_cast<double>(kr.k) * kr.k;
  double work = 0;
  switch (kr.kind) {
    case KernelKind::ConvBnAct:
      work = kk * ec_in * ec_out * hw;
      break;
    case KernelKind::DwConvBnAct:
      work = kk * ec_in * hw;
      break;
    case KernelKind::Se:
      work = 2.0 * ec_in * ec_out + 2.0 * ec_in * hw;
      break;
    case KernelKind::Fc:
      work = ec_in * ec_out;
      break;
    case KernelKind::GlobalPool:
    case KernelKind::ElementwiseAdd:
    case KernelKind::ActivationOnly:
      work = ec_in * hw;
      break;
  }
  double base = work / throughput_per_ms.at(kernel_kind_name(kr.kind));
  if (p == Precision::Int8) base /= int8_speedup(kr);
  return base + overhead_ms;
}

uint64_t GridSpec::count() const {
  uint64_t total = 0;
  for (const auto& g : kinds) {
    uint64_t acts = g.activations.empty() ? 1 : g.activations.size();
    uint64_t couts = g.tie_cout ? 1 : g.cout.size();
    total += acts * g.hw.size() * g.cin.size() * couts * g.k.size();
  }
  return total * 2;  // both precisions
}

GridSpec GridSpec::standard() {
  const std::vector<int> sides = {5, 7, 10, 14, 20, 28, 40, 56, 80, 112};
  const std::vector<int> chans = {8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096};
  const std::vector<int> odd_k = {1, 3, 5, 7};
  const std::vector<int> one = {1};
  GridSpec g;
  g.kinds.push_back({KernelKind::ConvBnAct, {"none", "relu", "relu6"}, sides, chans, chans, odd_k,
                     false});
  g.kinds.push_back({KernelKind::DwConvBnAct, {"none", "relu", "relu6"}, sides, chans, {}, odd_k,
                     true});
  g.kinds.push_back({KernelKind::Se, {"none"}, sides, chans,
                     {4, 8, 16, 32, 64, 128, 256, 512, 1024}, one, false});
  g.kinds.push_back({KernelKind::Fc, {"none"}, one, {256, 512, 1024, 1280, 1536, 2048}, {1000},
                     one, false});
  g.kinds.push_back({KernelKind::GlobalPool, {"none"}, sides, chans, {}, one, true});
  g.kinds.push_back({KernelKind::ElementwiseAdd, {"none"}, sides, chans, {}, one, true});
  g.kinds.push_back({KernelKind::ActivationOnly, {"relu", "relu6", "hswish", "swish"}, sides,
                     chans, {}, one, true});
  return g;
}

std::vector<LatencySample> synth_samples(const SyntheticDevice& dev, const GridSpec& grid,
                                         uint64_t seed, double noise_fraction) {
  std::vector<LatencySample> out;
  out.reserve(grid.count());
  for (const auto& g : grid.kinds) {
    const auto acts = g.activations.empty() ? std::vector<std::string>{"none"} : g.activations;
    for (const auto& act : acts) {
      for (int side : g.hw) {
        for (int cin : g.cin) {
          const auto couts = g.tie_cout ? std::vector<int>{cin} : g.cout;
          for (int cout : couts) {
            for (int k : g.k) {
              for (Precision p : {Precision::Fp32, Precision::Int8}) {
                Kernel kr{g.kind, side, side, cin, cout, k, 1, act};
                double base = dev.latency(kr, p);
                // Noise keyed by the config, not the emission order.
                std::ostringstream key;
                key << kernel_kind_name(g.kind) << '|' << act << '|' << side << '|' << cin << '|'
                    << cout << '|' << k << '|' << precision_name(p);
                const std::string ks = key.str();
                double eps = noise_fraction * keyed_noise(seed, hash_bytes(0, ks.data(), ks.size()));
                out.push_back({kr, p, base * (1.0 + eps)});
              }
            }
          }
        }
      }
    }
  }
  return out;
}

}  // namespace qnas
