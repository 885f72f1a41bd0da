#pragma once

#include <array>
#include <filesystem>
#include <unordered_map>

#include "qnas/archspace.hpp"
#include "qnas/costmodel.hpp"

namespace qnas {

// Per-layer quantization-aware loss table. A layer's entry is keyed by where
// it sits and what it is; an architecture's total loss is the sum over its
// layers plus fixed stem/head terms.
struct LutKey {
  int stage = 0;  // 1-based stage index
  int block_id = 0;
  int kernel = 0;
  int width = 0;
  int expand_milli = 0;  // expand ratio * 1000, exact for all preset ratios
  Precision precision{};

  bool operator==(const LutKey&) const = default;
  std::string describe() const;
};

struct LutKeyHash {
  size_t operator()(const LutKey& k) const;
};

class AccuracyLut {
 public:
  std::string hyperspace_id;
  double stem_loss = 0;
  double head_loss = 0;

  void set(const LutKey& key, double nsr_loss) { entries_[key] = nsr_loss; }
  // Throws MissingEntry for uncovered keys.
  double lookup(const LutKey& key) const;
  size_t size() const { return entries_.size(); }

  double total_loss(const Architecture& arch, Precision p) const;

  void save(const std::filesystem::path& p) const;
  static AccuracyLut load(const std::filesystem::path& p);

 private:
  std::unordered_map<LutKey, double, LutKeyHash> entries_;
};

// accuracy proxy in (0, 1]; higher is better.
double accuracy_proxy(const AccuracyLut& lut, const Architecture& arch,
                      Precision p = Precision::Int8);

// Shape of the synthetic quality landscape: loss shrinks with width, kernel
// size and expansion, grows with stage depth position, and differs by block
// family and precision.
struct QualityProfile {
  double stage_base = 0.055;
  double stage_step = 0.010;
  double width_exponent = 0.5;
  double kernel_exponent = 0.35;
  double expand_exponent = 0.3;
  double int8_factor = 1.25;
  double noise = 0.05;
  double stem_loss = 0.02;
  double head_loss = 0.01;
  // indexed by block id; lower is better
  std::array<double, kNumBlockIds> block_quality = {1.30, 1.00, 0.85, 1.15, 1.00, 1.05, 0.90};

  static QualityProfile defaults() { return {}; }
};

// Deterministic LUT covering every layer choice expressible in the
// hyperspace, both precisions. Noise is keyed, not sequential, so the result
// is independent of generation order.
AccuracyLut synth_lut(const Hyperspace& hs, uint64_t seed,
                      const QualityProfile& profile = QualityProfile::defaults());

}  // namespace qnas
