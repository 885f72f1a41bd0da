#include "qnas/accmodel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qnas/error.hpp"
#include "qnas/rng.hpp"
#include "qnas/util.hpp"
#include "qnas/version.hpp"

namespace qnas {

using nlohmann::json;

namespace {

int expand_to_milli(double e) { return static_cast<int>(std::llround(e * 1000.0)); }

std::string expand_from_milli(int milli) { return fmt_double(milli / 1000.0); }

}  // namespace

std::string LutKey::describe() const {
  std::ostringstream os;
  os << "stage=" << stage << " block=" << block_name(static_cast<BlockId>(block_id))
     << " k=" << kernel << " w=" << width << " e=" << expand_from_milli(expand_milli)
     << " prec=" << precision_name(precision);
  return os.str();
}

size_t LutKeyHash::operator()(const LutKey& k) const {
  uint64_t h = mix_seed(static_cast<uint64_t>(k.stage), static_cast<uint64_t>(k.block_id));
  h = mix_seed(h, static_cast<uint64_t>(k.kernel));
  h = mix_seed(h, static_cast<uint64_t>(k.width));
  h = mix_seed(h, static_cast<uint64_t>(k.expand_milli));
  h = mix_seed(h, static_cast<uint64_t>(k.precision));
  return static_cast<size_t>(h);
}

double AccuracyLut::lookup(const LutKey& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw MissingEntry(key.describe());
  return it->second;
}

double AccuracyLut::total_loss(const Architecture& arch, Precision p) const {
  double total = stem_loss + head_loss;
  for (size_t i = 0; i < arch.stages.size(); ++i) {
    const auto& s = arch.stages[i];
    for (const auto& l : s.layers) {
      LutKey key{static_cast<int>(i + 1), static_cast<int>(s.type), l.kernel, l.width,
                 expand_to_milli(l.expand), p};
      total += lookup(key);
    }
  }
  return total;
}

double accuracy_proxy(const AccuracyLut& lut, const Architecture& arch, Precision p) {
  return 1.0 / (1.0 + lut.total_loss(arch, p));
}

void AccuracyLut::save(const std::filesystem::path& p) const {
  json header;
  header["version"] = kFormatVersion;
  header["type"] = "accuracy_lut";
  header["hyperspace"] = hyperspace_id;
  header["stem_loss"] = stem_loss;
  header["head_loss"] = head_loss;

  std::vector<std::pair<LutKey, double>> rows(entries_.begin(), entries_.end());
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    const auto& x = a.first;
    const auto& y = b.first;
    return std::tie(x.stage, x.block_id, x.kernel, x.width, x.expand_milli, x.precision) <
           std::tie(y.stage, y.block_id, y.kernel, y.width, y.expand_milli, y.precision);
  });

  std::ostringstream os;
  os << '#' << header.dump() << "\n";
  os << "stage,block_id,kernel,width,expand,precision,nsr_loss\n";
  for (const auto& [k, v] : rows) {
    os << k.stage << ',' << k.block_id << ',' << k.kernel << ',' << k.width << ','
       << expand_from_milli(k.expand_milli) << ',' << precision_name(k.precision) << ','
       << fmt_double(v) << "\n";
  }
  write_file(p, os.str());
}

AccuracyLut AccuracyLut::load(const std::filesystem::path& p) {
  std::istringstream in(read_file(p));
  std::string line;
  if (!std::getline(in, line) || line.empty() || line[0] != '#')
    throw BadFormat(p.string() + ": missing JSON header line");
  json header;
  try {
    header = json::parse(line.substr(1));
  } catch (const json::exception& e) {
    throw BadFormat(p.string() + ": bad header: " + e.what());
  }
  int v = header.at("version").get<int>();
  if (v != kFormatVersion) throw UnsupportedVersion("accuracy_lut", v);
  if (header.value("type", "") != "accuracy_lut") throw BadFormat(p.string() + ": wrong type tag");

  AccuracyLut lut;
  lut.hyperspace_id = header.value("hyperspace", "");
  lut.stem_loss = header.at("stem_loss").get<double>();
  lut.head_loss = header.at("head_loss").get<double>();

  if (!std::getline(in, line)) throw BadFormat(p.string() + ": missing column header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "stage,block_id,kernel,width,expand,precision,nsr_loss")
    throw BadFormat(p.string() + ": unexpected column header '" + line + "'");

  size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split(line, ',');
    if (f.size() != 7)
      throw BadFormat(p.string() + ":" + std::to_string(lineno) + ": expected 7 fields");
    try {
      LutKey key;
      key.stage = std::stoi(f[0]);
      key.block_id = std::stoi(f[1]);
      key.kernel = std::stoi(f[2]);
      key.width = std::stoi(f[3]);
      key.expand_milli = expand_to_milli(std::stod(f[4]));
      key.precision = precision_from_name(f[5]);
      lut.set(key, std::stod(f[6]));
    } catch (const std::exception& e) {
      throw BadFormat(p.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return lut;
}

AccuracyLut synth_lut(const Hyperspace& hs, uint64_t seed, const QualityProfile& profile) {
  AccuracyLut lut;
  lut.hyperspace_id = hs.id;
  lut.stem_loss = profile.stem_loss;
  lut.head_loss = profile.head_loss;

  for (size_t i = 0; i < hs.stages.size(); ++i) {
    const auto& spec = hs.stages[i];
    const auto ladder = spec.width_ladder();
    const double stage_scale = profile.stage_base + profile.stage_step * static_cast<double>(i);
    for (BlockId b : spec.block_choices) {
      const BlockInfo& info = hs.block(b);
      const double e_min = info.expand_ratios.front();
      for (int k : spec.kernel_choices) {
        const double kf = std::pow(3.0 / k, profile.kernel_exponent);
        for (int w : ladder) {
          const double wf = std::pow(static_cast<double>(ladder.front()) / w,
                                     profile.width_exponent);
          for (double e : info.expand_ratios) {
            const double ef = std::pow((1.0 + e_min) / (1.0 + e), profile.expand_exponent);
            for (Precision p : {Precision::Fp32, Precision::Int8}) {
              const double pf = p == Precision::Int8 ? profile.int8_factor : 1.0;
              // Noise shared across widths/kernels of a slice so that the
              // monotone shape survives it.
              std::ostringstream key;
              key << (i + 1) << '|' << static_cast<int>(b) << '|' << expand_to_milli(e) << '|'
                  << precision_name(p);
              const std::string ks = key.str();
              const double nf =
                  1.0 + profile.noise * keyed_noise(seed, hash_bytes(0, ks.data(), ks.size()));
              const double v = stage_scale * profile.block_quality[static_cast<size_t>(b)] * wf *
                               kf * ef * pf * nf;
              lut.set({static_cast<int>(i + 1), static_cast<int>(b), k, w, expand_to_milli(e), p},
                      v);
            }
          }
        }
      }
    }
  }
  return lut;
}

}  // namespace qnas
