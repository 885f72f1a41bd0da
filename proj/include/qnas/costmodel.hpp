#pragma once

#include <filesystem>
#include <json.hpp>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qnas/archspace.hpp"

namespace qnas {

// Primitive execution units. A model's latency is the sum of its kernels'.
enum class KernelKind : int {
  ConvBnAct = 0,
  DwConvBnAct,
  Se,
  Fc,
  GlobalPool,
  ElementwiseAdd,
  ActivationOnly,
};

inline constexpr int kNumKernelKinds = 7;

const std::string& kernel_kind_name(KernelKind k);
KernelKind kernel_kind_from_name(const std::string& name);

enum class Precision : int { Fp32 = 0, Int8 = 1 };

const std::string& precision_name(Precision p);
Precision precision_from_name(const std::string& name);

// One primitive op instance.
//   conv_bn_act / dwconv_bn_act / fc : h,w are the OUTPUT spatial size.
//   se / global_pool / elementwise_add / activation_only : h,w are the tensor's
//   spatial size. For se, cout holds the squeeze (reduced) width.
// activation is the fused nonlinearity, "none" if the op is linear.
struct Kernel {
  KernelKind kind{};
  int h = 1;
  int w = 1;
  int cin = 1;
  int cout = 1;
  int k = 1;
  int stride = 1;
  std::string activation = "none";

  bool operator==(const Kernel&) const = default;
};

// Multiply-accumulate count of a single kernel (0 for memory-bound kinds).
uint64_t kernel_macs(const Kernel& k);

// Total MACs of the architecture.
uint64_t flops(const Architecture& arch);

// Kernel sequence of the architecture, stem -> stages -> head.
std::vector<Kernel> decompose(const Architecture& arch);

// Same kernels grouped by segment ("stem", "stage1".., "head").
struct Decomposition {
  std::vector<std::string> segment_names;
  std::vector<std::vector<Kernel>> segments;
  std::vector<Kernel> flatten() const;
};
Decomposition decompose_segmented(const Architecture& arch);

// ---- latency samples ----

struct LatencySample {
  Kernel kernel;
  Precision precision{};
  double latency_ms = 0;
};

// CSV with header kind,precision,h,w,cin,cout,k,stride,activation,latency_ms.
void write_samples_csv(const std::filesystem::path& p, std::span<const LatencySample> samples);
std::vector<LatencySample> read_samples_csv(const std::filesystem::path& p);

// ---- predictor ----

// Kernel-level latency tables with multilinear interpolation over a dense
// (hw, cin, cout, k) grid, one table per (kind, precision, activation).
// Out-of-grid queries clamp to the nearest edge. Grid cells never sampled are
// filled from the nearest sampled cell in index space.
class LatencyPredictor {
 public:
  struct Table {
    std::vector<double> hw, cin, cout, k;  // ascending axis coordinates
    std::vector<double> values;            // dense, hw-major

    double lookup(double hw_q, double cin_q, double cout_q, double k_q) const;
    size_t cells() const { return hw.size() * cin.size() * cout.size() * k.size(); }
  };

  static LatencyPredictor train(const std::vector<LatencySample>& samples,
                                const std::string& device_id = "");

  // Throws InsufficientSamples when no table covers the (kind, precision); a
  // missing activation falls back to the kind's first table of that precision.
  double predict(const Kernel& kernel, Precision p) const;
  double predict_total(std::span<const Kernel> kernels, Precision p) const;

  void save(const std::filesystem::path& p) const;
  static LatencyPredictor load(const std::filesystem::path& p);
  nlohmann::json to_json() const;
  static LatencyPredictor from_json(const nlohmann::json& j);

  const std::string& device_id() const { return device_id_; }
  size_t table_count() const { return tables_.size(); }

 private:
  std::string device_id_;
  // key: (kind, precision, activation)
  std::map<std::tuple<int, int, std::string>, Table> tables_;
};

// Model-level prediction: sum of per-kernel predictions over decompose(arch).
double predict_latency(const LatencyPredictor& pred, const Architecture& arch, Precision p);

// ---- synthetic device ----

// Closed-form device model used to generate latency samples and ground truth.
// latency = work / throughput / speedup(precision) + overhead, with channel
// counts rounded up to the device's vector-lane granularity first.
class SyntheticDevice {
 public:
  std::string id;
  int granularity_int8 = 16;
  int granularity_fp32 = 4;
  double overhead_ms = 0.002;
  double noise_fraction = 0.02;
  std::map<std::string, double> throughput_per_ms;          // by kind name
  std::map<std::string, std::map<int, double>> k_speedup;   // conv/dwconv int8 curves by kernel size
  std::map<std::string, double> kind_speedup;               // flat int8 speedups by kind name
  std::map<std::string, double> activation_speedup;         // activation_only int8 speedups by act

  static SyntheticDevice from_json(const nlohmann::json& j);
  static SyntheticDevice load(const std::filesystem::path& p);
  nlohmann::json to_json() const;

  int effective_channels(int c, Precision p) const;
  double int8_speedup(const Kernel& k) const;
  // Noise-free latency in ms.
  double latency(const Kernel& k, Precision p) const;
};

// Sampling grid for synthetic measurement campaigns.
struct KindGrid {
  KernelKind kind{};
  std::vector<std::string> activations;
  std::vector<int> hw;    // spatial side lengths (h == w)
  std::vector<int> cin;
  std::vector<int> cout;  // ignored when tie_cout is set
  std::vector<int> k;
  bool tie_cout = false;  // cout follows cin (dwconv, pool, add, activation)
};

struct GridSpec {
  std::vector<KindGrid> kinds;
  uint64_t count() const;  // rows produced per precision pair included
  static GridSpec standard();
};

// Deterministic sample set over the grid, both precisions, with multiplicative
// noise of at most +-noise_fraction keyed by (seed, kernel config).
std::vector<LatencySample> synth_samples(const SyntheticDevice& dev, const GridSpec& grid,
                                         uint64_t seed, double noise_fraction);

}  // namespace qnas
