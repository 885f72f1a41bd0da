#include "qnas/costmodel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qnas/error.hpp"
#include "qnas/util.hpp"

namespace qnas {

namespace {

const std::array<std::string, kNumKernelKinds> kKindNames = {
    "conv_bn_act", "dwconv_bn_act", "se", "fc", "global_pool", "elementwise_add",
    "activation_only"};

const std::array<std::string, 2> kPrecisionNames = {"fp32", "int8"};

// hswish/swish have no fused-int8 implementation path, so the nonlinearity
// runs as its own kernel; relu-family activations fuse into the preceding op.
bool fusable(const std::string& act) { return act == "none" || act == "relu" || act == "relu6"; }

struct Emitter {
  std::vector<Kernel>& out;
  int granularity;

  void conv(int h, int w, int cin, int cout, int k, int stride, const std::string& act) {
    if (fusable(act)) {
      out.push_back({KernelKind::ConvBnAct, h, w, cin, cout, k, stride, act});
    } else {
      out.push_back({KernelKind::ConvBnAct, h, w, cin, cout, k, stride, "none"});
      out.push_back({KernelKind::ActivationOnly, h, w, cout, cout, 1, 1, act});
    }
  }

  void dwconv(int h, int w, int c, int k, int stride, const std::string& act) {
    if (fusable(act)) {
      out.push_back({KernelKind::DwConvBnAct, h, w, c, c, k, stride, act});
    } else {
      out.push_back({KernelKind::DwConvBnAct, h, w, c, c, k, stride, "none"});
      out.push_back({KernelKind::ActivationOnly, h, w, c, c, 1, 1, act});
    }
  }

  void se(int h, int w, int c) {
    int reduced = round_up(ceil_div(c, 4), granularity);
    out.push_back({KernelKind::Se, h, w, c, reduced, 1, 1, "none"});
  }

  void add(int h, int w, int c) {
    out.push_back({KernelKind::ElementwiseAdd, h, w, c, c, 1, 1, "none"});
  }
};

// One searchable block. cin/c are input/output widths; (hi, wi) the input and
// (ho, wo) the output spatial size. The first spatial op carries the stride.
void emit_block(Emitter& em, BlockId type, const std::string& act, int cin, int c, int k,
                double expand, int stride, int hi, int wi, int ho, int wo) {
  const bool can_skip = stride == 1 && cin == c;
  switch (type) {
    case BlockId::MBv1: {
      em.dwconv(ho, wo, cin, k, stride, act);
      em.conv(ho, wo, cin, c, 1, 1, act);
      break;
    }
    case BlockId::MBv2:
    case BlockId::MBv3: {
      int hid = static_cast<int>(std::llround(cin * expand));
      if (expand != 1.0) em.conv(hi, wi, cin, hid, 1, 1, act);
      em.dwconv(ho, wo, hid, k, stride, act);
      if (type == BlockId::MBv3) em.se(ho, wo, hid);
      em.conv(ho, wo, hid, c, 1, 1, "none");
      if (can_skip) em.add(ho, wo, c);
      break;
    }
    case BlockId::ResidualBottleneck:
    case BlockId::ResidualBottleneckSE: {
      // Bottleneck width scales with the output width; the KxK conv strides.
      int hid = std::max(1, static_cast<int>(std::llround(c * expand)));
      em.conv(hi, wi, cin, hid, 1, 1, act);
      em.conv(ho, wo, hid, hid, k, stride, act);
      if (type == BlockId::ResidualBottleneckSE) em.se(ho, wo, hid);
      em.conv(ho, wo, hid, c, 1, 1, "none");
      if (can_skip) em.add(ho, wo, c);
      break;
    }
    case BlockId::FusedMB:
    case BlockId::FusedMBSE: {
      int hid = static_cast<int>(std::llround(cin * expand));
      const bool with_se = type == BlockId::FusedMBSE;
      if (expand == 1.0) {
        em.conv(ho, wo, cin, c, k, stride, act);
        if (with_se) em.se(ho, wo, c);
      } else {
        em.conv(ho, wo, cin, hid, k, stride, act);
        if (with_se) em.se(ho, wo, hid);
        em.conv(ho, wo, hid, c, 1, 1, "none");
      }
      if (can_skip) em.add(ho, wo, c);
      break;
    }
  }
}

}  // namespace

const std::string& kernel_kind_name(KernelKind k) { return kKindNames.at(static_cast<size_t>(k)); }

KernelKind kernel_kind_from_name(const std::string& name) {
  for (size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == name) return static_cast<KernelKind>(i);
  throw BadFormat("unknown kernel kind '" + name + "'");
}

const std::string& precision_name(Precision p) { return kPrecisionNames.at(static_cast<size_t>(p)); }

Precision precision_from_name(const std::string& name) {
  for (size_t i = 0; i < kPrecisionNames.size(); ++i)
    if (kPrecisionNames[i] == name) return static_cast<Precision>(i);
  throw BadFormat("unknown precision '" + name + "'");
}

uint64_t kernel_macs(const Kernel& k) {
  const auto h = static_cast<uint64_t>(k.h), w = static_cast<uint64_t>(k.w);
  const auto cin = static_cast<uint64_t>(k.cin), cout = static_cast<uint64_t>(k.cout);
  const auto kk = static_cast<uint64_t>(k.k) * static_cast<uint64_t>(k.k);
  switch (k.kind) {
    case KernelKind::ConvBnAct:
      return kk * cin * cout * h * w;
    case KernelKind::DwConvBnAct:
      return kk * cin * h * w;
    case KernelKind::Fc:
      return cin * cout;
    case KernelKind::Se:
      return 2 * cin * cout;  // squeeze + excite FC pair
    case KernelKind::GlobalPool:
    case KernelKind::ElementwiseAdd:
    case KernelKind::ActivationOnly:
      return 0;
  }
  return 0;
}

Decomposition decompose_segmented(const Architecture& arch) {
  if (arch.resolution <= 0) throw BadFormat("architecture: resolution must be positive");
  if (arch.stem.block_widths.empty())
    throw BadFormat("architecture: stem needs at least one block layer");
  Decomposition d;
  auto segment = [&](const std::string& name) -> Emitter {
    d.segment_names.push_back(name);
    d.segments.emplace_back();
    return Emitter{d.segments.back(), arch.granularity};
  };

  int res = arch.resolution;
  int h = ceil_div(res, arch.stem.conv_stride);
  {
    Emitter em = segment("stem");
    em.conv(h, h, 3, arch.stem.conv_width, arch.stem.conv_kernel, arch.stem.conv_stride,
            arch.stem.conv_activation);
    int cin = arch.stem.conv_width;
    for (int w : arch.stem.block_widths) {
      emit_block(em, arch.stem.block_type, arch.stem.block_activation, cin, w,
                 arch.stem.block_kernel, arch.stem.block_expand, 1, h, h, h, h);
      cin = w;
    }
  }
  int cin = arch.stem.block_widths.back();

  for (size_t i = 0; i < arch.stages.size(); ++i) {
    Emitter em = segment("stage" + std::to_string(i + 1));
    const auto& s = arch.stages[i];
    for (size_t j = 0; j < s.layers.size(); ++j) {
      const auto& l = s.layers[j];
      int stride = j == 0 ? s.stride : 1;
      int ho = ceil_div(h, stride);
      emit_block(em, s.type, s.activation, cin, l.width, l.kernel, l.expand, stride, h, h, ho, ho);
      h = ho;
      cin = l.width;
    }
  }

  {
    Emitter em = segment("head");
    em.conv(h, h, cin, arch.head.feature_dim, 1, 1, arch.head.activation);
    auto& out = em.out;
    out.push_back({KernelKind::GlobalPool, h, h, arch.head.feature_dim, arch.head.feature_dim, 1, 1,
                   "none"});
    out.push_back({KernelKind::Fc, 1, 1, arch.head.feature_dim, arch.head.classes, 1, 1, "none"});
  }
  return d;
}

std::vector<Kernel> Decomposition::flatten() const {
  std::vector<Kernel> out;
  for (const auto& seg : segments) out.insert(out.end(), seg.begin(), seg.end());
  return out;
}

std::vector<Kernel> decompose(const Architecture& arch) {
  return decompose_segmented(arch).flatten();
}

uint64_t flops(const Architecture& arch) {
  uint64_t total = 0;
  for (const auto& k : decompose(arch)) total += kernel_macs(k);
  return total;
}

// ---- CSV ----

static const char* kCsvHeader = "kind,precision,h,w,cin,cout,k,stride,activation,latency_ms";

void write_samples_csv(const std::filesystem::path& p, std::span<const LatencySample> samples) {
  std::ostringstream os;
  os << kCsvHeader << "\n";
  for (const auto& s : samples) {
    const auto& kr = s.kernel;
    os << kernel_kind_name(kr.kind) << ',' << precision_name(s.precision) << ',' << kr.h << ','
       << kr.w << ',' << kr.cin << ',' << kr.cout << ',' << kr.k << ',' << kr.stride << ','
       << kr.activation << ',' << fmt_double(s.latency_ms) << "\n";
  }
  write_file(p, os.str());
}

std::vector<LatencySample> read_samples_csv(const std::filesystem::path& p) {
  std::istringstream in(read_file(p));
  std::string line;
  if (!std::getline(in, line)) throw BadFormat(p.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader)
    throw BadFormat(p.string() + ": unexpected header '" + line + "'");
  std::vector<LatencySample> out;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split(line, ',');
    if (f.size() != 10)
      throw BadFormat(p.string() + ":" + std::to_string(lineno) + ": expected 10 fields");
    try {
      LatencySample s;
      s.kernel.kind = kernel_kind_from_name(f[0]);
      s.precision = precision_from_name(f[1]);
      s.kernel.h = std::stoi(f[2]);
      s.kernel.w = std::stoi(f[3]);
      s.kernel.cin = std::stoi(f[4]);
      s.kernel.cout = std::stoi(f[5]);
      s.kernel.k = std::stoi(f[6]);
      s.kernel.stride = std::stoi(f[7]);
      s.kernel.activation = f[8];
      s.latency_ms = std::stod(f[9]);
      if (s.kernel.h <= 0 || s.kernel.w <= 0 || s.kernel.cin <= 0 || s.kernel.cout <= 0 ||
          s.kernel.k <= 0 || s.latency_ms < 0)
        throw BadFormat("non-positive dimension");
      out.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw BadFormat(p.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace qnas
