#include "qnas/archspace.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>

#include "qnas/error.hpp"
#include "qnas/util.hpp"
#include "qnas/version.hpp"

namespace qnas {

using nlohmann::json;

namespace {

const std::array<std::string, kNumBlockIds> kBlockNames = {
    "mbv1", "mbv2", "mbv3", "residual", "residual_se", "fused_mb", "fused_mb_se"};

const std::array<std::string, 5> kActivations = {"relu", "relu6", "hswish", "swish", "none"};

void require(bool cond, const std::string& msg) {
  if (!cond) throw BadFormat(msg);
}

void check_version(const json& j, const std::string& what) {
  require(j.is_object(), what + ": expected a JSON object");
  require(j.contains("version"), what + ": missing version");
  int v = j.at("version").get<int>();
  if (v != kFormatVersion) throw UnsupportedVersion(what, v);
}

bool known_activation(const std::string& a) {
  return std::find(kActivations.begin(), kActivations.end(), a) != kActivations.end();
}

}  // namespace

const std::string& block_name(BlockId id) { return kBlockNames.at(static_cast<size_t>(id)); }

BlockId block_from_name(const std::string& name) {
  for (size_t i = 0; i < kBlockNames.size(); ++i)
    if (kBlockNames[i] == name) return static_cast<BlockId>(i);
  throw BadFormat("unknown block type '" + name + "'");
}

std::vector<int> ElasticStageSpec::width_ladder() const {
  std::vector<int> out;
  for (int w = width_min; w <= width_max; w += granularity) out.push_back(w);
  return out;
}

std::vector<int> ElasticStageSpec::window(int start) const {
  std::vector<int> out;
  out.reserve(ck);
  for (int i = 0; i < ck; ++i) out.push_back(width_min + (start + i) * granularity);
  return out;
}

// ---- Hyperspace ----

Hyperspace Hyperspace::from_json(const json& j) {
  check_version(j, "hyperspace");
  Hyperspace hs;
  hs.id = j.at("id").get<std::string>();
  hs.granularity = j.at("granularity").get<int>();
  hs.resolutions = j.at("resolutions").get<std::vector<int>>();

  for (const auto& b : j.at("block_table")) {
    BlockInfo info;
    info.id = static_cast<BlockId>(b.at("id").get<int>());
    require(block_name(info.id) == b.at("name").get<std::string>(),
            "hyperspace: block id/name mismatch for id " + std::to_string(b.at("id").get<int>()));
    info.activation = b.at("activation").get<std::string>();
    info.expand_ratios = b.at("expand_ratios").get<std::vector<double>>();
    hs.block_table.push_back(std::move(info));
  }

  const auto& st = j.at("stem");
  const auto& sc = st.at("conv");
  hs.stem.conv_kernel = sc.at("kernel").get<int>();
  hs.stem.conv_stride = sc.at("stride").get<int>();
  hs.stem.conv_widths = sc.at("widths").get<std::vector<int>>();
  hs.stem.conv_activation = sc.at("activation").get<std::string>();
  const auto& sb = st.at("block");
  hs.stem.block_type = block_from_name(sb.at("type").get<std::string>());
  hs.stem.block_activation = sb.at("activation").get<std::string>();
  hs.stem.block_kernel = sb.at("kernel").get<int>();
  hs.stem.block_depth_min = sb.at("depth_range").at(0).get<int>();
  hs.stem.block_depth_max = sb.at("depth_range").at(1).get<int>();
  hs.stem.block_widths = sb.at("widths").get<std::vector<int>>();
  hs.stem.block_expand = sb.at("expand").get<double>();

  for (const auto& s : j.at("stages")) {
    ElasticStageSpec spec;
    for (int id : s.at("block_choice_ids").get<std::vector<int>>())
      spec.block_choices.push_back(static_cast<BlockId>(id));
    spec.depth_min = s.at("depth_range").at(0).get<int>();
    spec.depth_max = s.at("depth_range").at(1).get<int>();
    spec.kernel_choices = s.at("kernel_choices").get<std::vector<int>>();
    spec.stride = s.at("stride").get<int>();
    spec.width_min = s.at("width_min").get<int>();
    spec.width_max = s.at("width_max").get<int>();
    spec.granularity = s.value("granularity", hs.granularity);
    spec.ck = s.at("ck").get<int>();
    hs.stages.push_back(std::move(spec));
  }

  const auto& hd = j.at("head");
  hs.head.feature_dim = hd.at("feature_dim").get<int>();
  hs.head.classes = hd.at("classes").get<int>();
  hs.head.activation = hd.at("activation").get<std::string>();

  hs.validate();
  return hs;
}

Hyperspace Hyperspace::load(const std::filesystem::path& p) {
  json j;
  try {
    j = json::parse(read_file(p));
  } catch (const json::exception& e) {
    throw BadFormat(p.string() + ": " + e.what());
  }
  return from_json(j);
}

json Hyperspace::to_json() const {
  json j;
  j["version"] = kFormatVersion;
  j["id"] = id;
  j["granularity"] = granularity;
  j["resolutions"] = resolutions;
  json table = json::array();
  for (const auto& b : block_table) {
    table.push_back({{"id", static_cast<int>(b.id)},
                     {"name", block_name(b.id)},
                     {"activation", b.activation},
                     {"expand_ratios", b.expand_ratios}});
  }
  j["block_table"] = std::move(table);
  j["stem"] = {{"conv",
                {{"kernel", stem.conv_kernel},
                 {"stride", stem.conv_stride},
                 {"widths", stem.conv_widths},
                 {"activation", stem.conv_activation}}},
               {"block",
                {{"type", block_name(stem.block_type)},
                 {"activation", stem.block_activation},
                 {"kernel", stem.block_kernel},
                 {"depth_range", {stem.block_depth_min, stem.block_depth_max}},
                 {"widths", stem.block_widths},
                 {"expand", stem.block_expand}}}};
  json stages_j = json::array();
  for (const auto& s : stages) {
    json sj;
    json ids = json::array();
    for (BlockId b : s.block_choices) ids.push_back(static_cast<int>(b));
    sj["block_choice_ids"] = std::move(ids);
    sj["depth_range"] = {s.depth_min, s.depth_max};
    sj["kernel_choices"] = s.kernel_choices;
    sj["stride"] = s.stride;
    sj["width_min"] = s.width_min;
    sj["width_max"] = s.width_max;
    sj["granularity"] = s.granularity;
    sj["ck"] = s.ck;
    stages_j.push_back(std::move(sj));
  }
  j["stages"] = std::move(stages_j);
  j["head"] = {{"feature_dim", head.feature_dim},
               {"classes", head.classes},
               {"activation", head.activation}};
  return j;
}

void Hyperspace::save(const std::filesystem::path& p) const { write_file(p, to_json().dump(2) + "\n"); }

const BlockInfo& Hyperspace::block(BlockId id) const {
  for (const auto& b : block_table)
    if (b.id == id) return b;
  throw BadFormat("hyperspace '" + this->id + "' has no block table entry for id " +
                  std::to_string(static_cast<int>(id)));
}

void Hyperspace::validate() const {
  require(!id.empty(), "hyperspace: empty id");
  require(granularity > 0, "hyperspace: granularity must be positive");
  require(!resolutions.empty() && std::is_sorted(resolutions.begin(), resolutions.end()),
          "hyperspace: resolutions must be nonempty ascending");
  require(!block_table.empty(), "hyperspace: empty block table");
  for (const auto& b : block_table) {
    int raw = static_cast<int>(b.id);
    require(raw >= 0 && raw < kNumBlockIds, "hyperspace: block id out of range");
    require(known_activation(b.activation) && b.activation != "none",
            "hyperspace: bad block activation '" + b.activation + "'");
    require(!b.expand_ratios.empty() &&
                std::is_sorted(b.expand_ratios.begin(), b.expand_ratios.end()),
            "hyperspace: expand_ratios must be nonempty ascending");
    for (double e : b.expand_ratios) require(e > 0, "hyperspace: expand ratio must be positive");
  }
  for (size_t i = 0; i < block_table.size(); ++i)
    for (size_t k = i + 1; k < block_table.size(); ++k)
      require(block_table[i].id != block_table[k].id, "hyperspace: duplicate block table id");

  require(!stem.conv_widths.empty() &&
              std::is_sorted(stem.conv_widths.begin(), stem.conv_widths.end()),
          "hyperspace: stem conv widths must be nonempty ascending");
  require(!stem.block_widths.empty() &&
              std::is_sorted(stem.block_widths.begin(), stem.block_widths.end()),
          "hyperspace: stem block widths must be nonempty ascending");
  require(stem.block_depth_min >= 1 && stem.block_depth_min <= stem.block_depth_max,
          "hyperspace: bad stem depth range");
  block(stem.block_type);  // must be present in the table
  require(known_activation(stem.conv_activation) && known_activation(stem.block_activation),
          "hyperspace: bad stem activation");

  require(!stages.empty(), "hyperspace: no stages");
  for (size_t i = 0; i < stages.size(); ++i) {
    const auto& s = stages[i];
    const std::string where = "hyperspace stage " + std::to_string(i + 1);
    require(!s.block_choices.empty(), where + ": empty block choices");
    for (BlockId b : s.block_choices) block(b);
    require(s.depth_min >= 1 && s.depth_min <= s.depth_max, where + ": bad depth range");
    require(!s.kernel_choices.empty() &&
                std::is_sorted(s.kernel_choices.begin(), s.kernel_choices.end()),
            where + ": kernel choices must be nonempty ascending");
    for (int k : s.kernel_choices) require(k >= 1 && k % 2 == 1, where + ": kernels must be odd");
    require(s.stride == 1 || s.stride == 2, where + ": stride must be 1 or 2");
    require(s.granularity > 0, where + ": granularity must be positive");
    require(s.width_min > 0 && s.width_min <= s.width_max, where + ": bad width range");
    require(s.width_min % s.granularity == 0 && s.width_max % s.granularity == 0,
            where + ": width bounds must be multiples of granularity");
    require(s.ck >= 1 && s.ck <= s.ladder_size(),
            where + ": ck must be in [1, ladder size]");
  }
  require(head.feature_dim > 0 && head.classes > 0, "hyperspace: bad head dims");
  require(known_activation(head.activation), "hyperspace: bad head activation");
}

BigInt Hyperspace::space_count() const {
  BigInt total = 1;
  for (const auto& s : stages) total *= BigInt(s.block_choices.size()) * s.window_count();
  return total;
}

bool Hyperspace::compact_encoding() const {
  for (const auto& s : stages) {
    if (s.window_count() > 10) return false;
    for (BlockId b : s.block_choices)
      if (static_cast<int>(b) > 9) return false;
  }
  return true;
}

// ---- SearchSpace ----

SearchSpace::SearchSpace(const Hyperspace& hs, std::vector<int> block_index,
                         std::vector<int> width_start)
    : hs_(&hs), block_index_(std::move(block_index)), width_start_(std::move(width_start)) {
  require(block_index_.size() == hs.stages.size() && width_start_.size() == hs.stages.size(),
          "search space: per-stage choice count mismatch");
  for (size_t i = 0; i < hs.stages.size(); ++i) {
    const auto& s = hs.stages[i];
    require(block_index_[i] >= 0 && block_index_[i] < static_cast<int>(s.block_choices.size()),
            "search space: block index out of range at stage " + std::to_string(i + 1));
    require(width_start_[i] >= 0 && width_start_[i] < s.window_count(),
            "search space: window start out of range at stage " + std::to_string(i + 1));
  }
}

BlockId SearchSpace::stage_block(int stage) const {
  return hs_->stages[stage].block_choices[block_index_[stage]];
}

const BlockInfo& SearchSpace::stage_block_info(int stage) const {
  return hs_->block(stage_block(stage));
}

std::vector<int> SearchSpace::stage_widths(int stage) const {
  return hs_->stages[stage].window(width_start_[stage]);
}

std::string SearchSpace::encode() const {
  const size_t n = hs_->stages.size();
  std::string blocks, widths;
  const bool compact = hs_->compact_encoding();
  for (size_t i = 0; i < n; ++i) {
    if (!compact && i > 0) {
      blocks += ',';
      widths += ',';
    }
    blocks += std::to_string(static_cast<int>(stage_block(static_cast<int>(i))));
    widths += std::to_string(width_start_[i]);
  }
  return blocks + "-" + widths;
}

SearchSpace SearchSpace::decode(const std::string& text, const Hyperspace& hs) {
  const size_t n = hs.stages.size();
  auto dash = text.find('-');
  if (dash == std::string::npos || text.find('-', dash + 1) != std::string::npos)
    throw MalformedEncoding("expected exactly one '-' separator in '" + text + "'");
  const std::string block_part = text.substr(0, dash);
  const std::string width_part = text.substr(dash + 1);

  std::vector<int> block_digits, width_digits;
  if (text.find(',') != std::string::npos) {
    for (const auto& tok : split(block_part, ',')) {
      if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(c); }))
        throw MalformedEncoding("bad block token '" + tok + "'");
      block_digits.push_back(std::stoi(tok));
    }
    for (const auto& tok : split(width_part, ',')) {
      if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(c); }))
        throw MalformedEncoding("bad width token '" + tok + "'");
      width_digits.push_back(std::stoi(tok));
    }
  } else {
    for (char c : block_part) {
      if (!std::isdigit(static_cast<unsigned char>(c))) throw MalformedEncoding("non-digit in '" + text + "'");
      block_digits.push_back(c - '0');
    }
    for (char c : width_part) {
      if (!std::isdigit(static_cast<unsigned char>(c))) throw MalformedEncoding("non-digit in '" + text + "'");
      width_digits.push_back(c - '0');
    }
  }
  if (block_digits.size() != n || width_digits.size() != n)
    throw MalformedEncoding("'" + text + "' does not have " + std::to_string(n) +
                            " entries per half");

  std::vector<int> block_index(n), width_start(n);
  for (size_t i = 0; i < n; ++i) {
    const auto& s = hs.stages[i];
    auto it = std::find(s.block_choices.begin(), s.block_choices.end(),
                        static_cast<BlockId>(block_digits[i]));
    if (block_digits[i] >= kNumBlockIds || it == s.block_choices.end())
      throw OutOfRangeDigit(static_cast<int>(i + 1),
                            "block type " + std::to_string(block_digits[i]) + " not available");
    block_index[i] = static_cast<int>(it - s.block_choices.begin());
    if (width_digits[i] >= s.window_count())
      throw OutOfRangeDigit(static_cast<int>(i + 1),
                            "window start " + std::to_string(width_digits[i]) + " >= " +
                                std::to_string(s.window_count()));
    width_start[i] = width_digits[i];
  }
  return SearchSpace(hs, std::move(block_index), std::move(width_start));
}

std::string encode_space(const SearchSpace& space) { return space.encode(); }

SearchSpace decode_space(const std::string& text, const Hyperspace& hs) {
  return SearchSpace::decode(text, hs);
}

// ---- Architecture ----

json Architecture::to_json() const {
  json j;
  j["version"] = kFormatVersion;
  j["resolution"] = resolution;
  j["granularity"] = granularity;
  if (!hyperspace_id.empty()) j["hyperspace"] = hyperspace_id;
  if (!space_encoding.empty()) j["space"] = space_encoding;
  j["stem"] = {{"conv",
                {{"c", stem.conv_width},
                 {"k", stem.conv_kernel},
                 {"stride", stem.conv_stride},
                 {"act", stem.conv_activation}}},
               {"block",
                {{"type", block_name(stem.block_type)},
                 {"act", stem.block_activation},
                 {"k", stem.block_kernel},
                 {"e", stem.block_expand},
                 {"d", static_cast<int>(stem.block_widths.size())},
                 {"c", stem.block_widths}}}};
  json stages_j = json::array();
  for (const auto& s : stages) {
    json sj;
    sj["type"] = block_name(s.type);
    sj["act"] = s.activation;
    sj["stride"] = s.stride;
    sj["d"] = static_cast<int>(s.layers.size());
    json c = json::array(), k = json::array(), e = json::array();
    for (const auto& l : s.layers) {
      c.push_back(l.width);
      k.push_back(l.kernel);
      e.push_back(l.expand);
    }
    sj["c"] = std::move(c);
    sj["k"] = std::move(k);
    sj["e"] = std::move(e);
    stages_j.push_back(std::move(sj));
  }
  j["stages"] = std::move(stages_j);
  j["head"] = {{"c", head.feature_dim}, {"classes", head.classes}, {"act", head.activation}};
  return j;
}

Architecture Architecture::from_json(const json& j) {
  check_version(j, "architecture");
  Architecture a;
  a.resolution = j.at("resolution").get<int>();
  a.granularity = j.at("granularity").get<int>();
  a.hyperspace_id = j.value("hyperspace", "");
  a.space_encoding = j.value("space", "");
  const auto& sc = j.at("stem").at("conv");
  a.stem.conv_width = sc.at("c").get<int>();
  a.stem.conv_kernel = sc.at("k").get<int>();
  a.stem.conv_stride = sc.at("stride").get<int>();
  a.stem.conv_activation = sc.at("act").get<std::string>();
  const auto& sb = j.at("stem").at("block");
  a.stem.block_type = block_from_name(sb.at("type").get<std::string>());
  a.stem.block_activation = sb.at("act").get<std::string>();
  a.stem.block_kernel = sb.at("k").get<int>();
  a.stem.block_expand = sb.at("e").get<double>();
  a.stem.block_widths = sb.at("c").get<std::vector<int>>();
  require(sb.at("d").get<int>() == static_cast<int>(a.stem.block_widths.size()),
          "architecture: stem d/c mismatch");
  for (const auto& sj : j.at("stages")) {
    StageConfig s;
    s.type = block_from_name(sj.at("type").get<std::string>());
    s.activation = sj.at("act").get<std::string>();
    s.stride = sj.at("stride").get<int>();
    auto c = sj.at("c").get<std::vector<int>>();
    auto k = sj.at("k").get<std::vector<int>>();
    auto e = sj.at("e").get<std::vector<double>>();
    require(c.size() == k.size() && c.size() == e.size(), "architecture: c/k/e size mismatch");
    require(sj.at("d").get<int>() == static_cast<int>(c.size()), "architecture: d/c mismatch");
    for (size_t i = 0; i < c.size(); ++i) s.layers.push_back({k[i], c[i], e[i]});
    a.stages.push_back(std::move(s));
  }
  const auto& hd = j.at("head");
  a.head.feature_dim = hd.at("c").get<int>();
  a.head.classes = hd.at("classes").get<int>();
  a.head.activation = hd.at("act").get<std::string>();
  return a;
}

Architecture Architecture::load(const std::filesystem::path& p) {
  json j;
  try {
    j = json::parse(read_file(p));
  } catch (const json::exception& e) {
    throw BadFormat(p.string() + ": " + e.what());
  }
  return from_json(j);
}

void Architecture::save(const std::filesystem::path& p) const {
  write_file(p, to_json().dump(2) + "\n");
}

std::string Architecture::describe() const {
  std::ostringstream os;
  os << "r" << resolution << " g" << granularity;
  os << " stem(c" << stem.conv_width << "k" << stem.conv_kernel << "/" << stem.conv_activation
     << "," << block_name(stem.block_type) << "/" << stem.block_activation << "k"
     << stem.block_kernel << "e" << fmt_double(stem.block_expand) << "w[";
  for (size_t i = 0; i < stem.block_widths.size(); ++i)
    os << (i ? "," : "") << stem.block_widths[i];
  os << "])";
  for (size_t i = 0; i < stages.size(); ++i) {
    const auto& s = stages[i];
    os << " s" << (i + 1) << "(" << block_name(s.type) << "/" << s.activation << "/st" << s.stride;
    for (const auto& l : s.layers)
      os << ";k" << l.kernel << "w" << l.width << "e" << fmt_double(l.expand);
    os << ")";
  }
  os << " head(" << head.feature_dim << "/" << head.activation << "/" << head.classes << ")";
  return os.str();
}

// ---- space operations ----

Architecture sample_architecture(const SearchSpace& space, RngStream& rng) {
  const Hyperspace& hs = space.hyperspace();
  Architecture a;
  a.resolution = rng.pick(hs.resolutions);
  a.granularity = hs.granularity;
  a.hyperspace_id = hs.id;
  a.space_encoding = space.encode();
  a.stem.conv_width = rng.pick(hs.stem.conv_widths);
  a.stem.conv_kernel = hs.stem.conv_kernel;
  a.stem.conv_stride = hs.stem.conv_stride;
  a.stem.conv_activation = hs.stem.conv_activation;
  a.stem.block_type = hs.stem.block_type;
  a.stem.block_activation = hs.stem.block_activation;
  a.stem.block_kernel = hs.stem.block_kernel;
  a.stem.block_expand = hs.stem.block_expand;
  int stem_depth = rng.range(hs.stem.block_depth_min, hs.stem.block_depth_max);
  for (int d = 0; d < stem_depth; ++d) a.stem.block_widths.push_back(rng.pick(hs.stem.block_widths));
  for (size_t i = 0; i < hs.stages.size(); ++i) {
    const auto& spec = hs.stages[i];
    const BlockInfo& info = space.stage_block_info(static_cast<int>(i));
    StageConfig s;
    s.type = info.id;
    s.activation = info.activation;
    s.stride = spec.stride;
    const auto widths = space.stage_widths(static_cast<int>(i));
    int depth = rng.range(spec.depth_min, spec.depth_max);
    for (int d = 0; d < depth; ++d) {
      LayerChoice l;
      l.kernel = rng.pick(spec.kernel_choices);
      l.width = rng.pick(widths);
      l.expand = rng.pick(info.expand_ratios);
      s.layers.push_back(l);
    }
    a.stages.push_back(std::move(s));
  }
  a.head = hs.head;
  return a;
}

namespace {

Architecture extreme_architecture(const SearchSpace& space, bool maximal) {
  const Hyperspace& hs = space.hyperspace();
  auto lo_hi = [&](const auto& v) { return maximal ? v.back() : v.front(); };
  Architecture a;
  a.resolution = lo_hi(hs.resolutions);
  a.granularity = hs.granularity;
  a.hyperspace_id = hs.id;
  a.space_encoding = space.encode();
  a.stem.conv_width = lo_hi(hs.stem.conv_widths);
  a.stem.conv_kernel = hs.stem.conv_kernel;
  a.stem.conv_stride = hs.stem.conv_stride;
  a.stem.conv_activation = hs.stem.conv_activation;
  a.stem.block_type = hs.stem.block_type;
  a.stem.block_activation = hs.stem.block_activation;
  a.stem.block_kernel = hs.stem.block_kernel;
  a.stem.block_expand = hs.stem.block_expand;
  int stem_depth = maximal ? hs.stem.block_depth_max : hs.stem.block_depth_min;
  a.stem.block_widths.assign(stem_depth, lo_hi(hs.stem.block_widths));
  for (size_t i = 0; i < hs.stages.size(); ++i) {
    const auto& spec = hs.stages[i];
    const BlockInfo& info = space.stage_block_info(static_cast<int>(i));
    StageConfig s;
    s.type = info.id;
    s.activation = info.activation;
    s.stride = spec.stride;
    const auto widths = space.stage_widths(static_cast<int>(i));
    int depth = maximal ? spec.depth_max : spec.depth_min;
    LayerChoice l{lo_hi(spec.kernel_choices), lo_hi(widths), lo_hi(info.expand_ratios)};
    s.layers.assign(depth, l);
    a.stages.push_back(std::move(s));
  }
  a.head = hs.head;
  return a;
}

}  // namespace

Architecture min_architecture(const SearchSpace& space) { return extreme_architecture(space, false); }

Architecture max_architecture(const SearchSpace& space) { return extreme_architecture(space, true); }

SearchSpace random_space(const Hyperspace& hs, RngStream& rng) {
  std::vector<int> blocks(hs.stages.size()), widths(hs.stages.size());
  for (size_t i = 0; i < hs.stages.size(); ++i) {
    blocks[i] = static_cast<int>(rng.index(hs.stages[i].block_choices.size()));
    widths[i] = static_cast<int>(rng.index(static_cast<size_t>(hs.stages[i].window_count())));
  }
  return SearchSpace(hs, std::move(blocks), std::move(widths));
}

BigInt space_cardinality(const SearchSpace& space) {
  const Hyperspace& hs = space.hyperspace();
  BigInt total = BigInt(hs.resolutions.size()) * BigInt(hs.stem.conv_widths.size());
  BigInt stem_sum = 0;
  for (int d = hs.stem.block_depth_min; d <= hs.stem.block_depth_max; ++d)
    stem_sum += boost::multiprecision::pow(BigInt(hs.stem.block_widths.size()),
                                           static_cast<unsigned>(d));
  total *= stem_sum;
  for (size_t i = 0; i < hs.stages.size(); ++i) {
    const auto& spec = hs.stages[i];
    const BlockInfo& info = space.stage_block_info(static_cast<int>(i));
    BigInt per_layer = BigInt(spec.kernel_choices.size()) * spec.ck * info.expand_ratios.size();
    BigInt stage_sum = 0;
    for (int d = spec.depth_min; d <= spec.depth_max; ++d)
      stage_sum += boost::multiprecision::pow(per_layer, static_cast<unsigned>(d));
    total *= stage_sum;
  }
  return total;
}

std::vector<SearchSpace> enumerate_spaces(const Hyperspace& hs, size_t limit) {
  if (hs.space_count() > limit)
    throw BadFormat("hyperspace '" + hs.id + "' has too many spaces to enumerate");
  const size_t n = hs.stages.size();
  std::vector<SearchSpace> out;
  std::vector<int> blocks(n, 0), widths(n, 0);
  while (true) {
    out.emplace_back(hs, blocks, widths);
    // Odometer increment, widths fastest.
    size_t i = n;
    while (i > 0) {
      --i;
      if (++widths[i] < hs.stages[i].window_count()) break;
      widths[i] = 0;
      if (++blocks[i] < static_cast<int>(hs.stages[i].block_choices.size())) break;
      blocks[i] = 0;
      if (i == 0) return out;
    }
  }
}

std::optional<std::string> validate_architecture(const Architecture& arch, const SearchSpace& space) {
  const Hyperspace& hs = space.hyperspace();
  auto contains = [](const auto& v, const auto& x) {
    return std::find(v.begin(), v.end(), x) != v.end();
  };
  if (!contains(hs.resolutions, arch.resolution)) return "resolution not in hyperspace";
  if (arch.granularity != hs.granularity) return "granularity mismatch";
  if (!contains(hs.stem.conv_widths, arch.stem.conv_width)) return "stem conv width not allowed";
  if (arch.stem.conv_kernel != hs.stem.conv_kernel || arch.stem.conv_stride != hs.stem.conv_stride ||
      arch.stem.conv_activation != hs.stem.conv_activation)
    return "stem conv config mismatch";
  if (arch.stem.block_type != hs.stem.block_type ||
      arch.stem.block_activation != hs.stem.block_activation ||
      arch.stem.block_kernel != hs.stem.block_kernel || arch.stem.block_expand != hs.stem.block_expand)
    return "stem block config mismatch";
  int sd = static_cast<int>(arch.stem.block_widths.size());
  if (sd < hs.stem.block_depth_min || sd > hs.stem.block_depth_max) return "stem depth out of range";
  for (int w : arch.stem.block_widths)
    if (!contains(hs.stem.block_widths, w)) return "stem block width not allowed";
  if (arch.stages.size() != hs.stages.size()) return "stage count mismatch";
  for (size_t i = 0; i < hs.stages.size(); ++i) {
    const auto& spec = hs.stages[i];
    const auto& s = arch.stages[i];
    const BlockInfo& info = space.stage_block_info(static_cast<int>(i));
    const std::string where = "stage " + std::to_string(i + 1) + ": ";
    if (s.type != info.id) return where + "block type not the space's choice";
    if (s.activation != info.activation) return where + "activation mismatch";
    if (s.stride != spec.stride) return where + "stride mismatch";
    int d = static_cast<int>(s.layers.size());
    if (d < spec.depth_min || d > spec.depth_max) return where + "depth out of range";
    const auto widths = space.stage_widths(static_cast<int>(i));
    for (const auto& l : s.layers) {
      if (!contains(spec.kernel_choices, l.kernel)) return where + "kernel not allowed";
      if (!contains(widths, l.width)) return where + "width outside window";
      if (!contains(info.expand_ratios, l.expand)) return where + "expand ratio not allowed";
    }
  }
  if (arch.head.feature_dim != hs.head.feature_dim || arch.head.classes != hs.head.classes ||
      arch.head.activation != hs.head.activation)
    return "head mismatch";
  return std::nullopt;
}

}  // namespace qnas
