#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "qnas/rng.hpp"

namespace qnas {

using BigInt = boost::multiprecision::cpp_int;

// Searchable block families. The integer values are the search ids used in
// space encodings and accuracy tables.
enum class BlockId : int {
  MBv1 = 0,
  MBv2 = 1,
  MBv3 = 2,
  ResidualBottleneck = 3,
  ResidualBottleneckSE = 4,
  FusedMB = 5,
  FusedMBSE = 6,
};

inline constexpr int kNumBlockIds = 7;

const std::string& block_name(BlockId id);
BlockId block_from_name(const std::string& name);

struct BlockInfo {
  BlockId id{};
  std::string activation;             // relu | relu6 | hswish | swish
  std::vector<double> expand_ratios;  // candidate expansion ratios
};

// One elastic stage of the hyperspace: which block families may occupy it,
// the depth range, kernel choices, stride of the first layer, and the width
// ladder from which a space picks a contiguous window of ck entries.
struct ElasticStageSpec {
  std::vector<BlockId> block_choices;
  int depth_min = 1;
  int depth_max = 1;
  std::vector<int> kernel_choices;
  int stride = 1;
  int width_min = 0;
  int width_max = 0;
  int granularity = 8;
  int ck = 1;

  std::vector<int> width_ladder() const;  // width_min .. width_max step granularity
  int ladder_size() const { return (width_max - width_min) / granularity + 1; }
  int window_count() const { return ladder_size() - ck + 1; }
  std::vector<int> window(int start) const;  // ck consecutive ladder entries
};

// Fixed (non-searchable) entry and exit of every architecture.
struct StemSpec {
  int conv_kernel = 3;
  int conv_stride = 2;
  std::vector<int> conv_widths;
  std::string conv_activation = "relu";
  BlockId block_type = BlockId::ResidualBottleneck;
  std::string block_activation = "relu";
  int block_kernel = 3;
  int block_depth_min = 1;
  int block_depth_max = 2;
  std::vector<int> block_widths;
  double block_expand = 1.0;
};

struct HeadSpec {
  int feature_dim = 1280;
  int classes = 1000;
  std::string activation = "relu";
};

class Hyperspace {
 public:
  std::string id;
  int granularity = 8;
  std::vector<int> resolutions;
  std::vector<BlockInfo> block_table;
  StemSpec stem;
  std::vector<ElasticStageSpec> stages;
  HeadSpec head;

  static Hyperspace from_json(const nlohmann::json& j);
  static Hyperspace load(const std::filesystem::path& p);
  nlohmann::json to_json() const;
  void save(const std::filesystem::path& p) const;

  const BlockInfo& block(BlockId id) const;
  void validate() const;

  // Number of distinct search spaces (product over stages of
  // |block_choices| * window_count).
  BigInt space_count() const;

  // True when every stage has at most 10 block choices and 10 windows, so
  // the compact digit encoding applies.
  bool compact_encoding() const;
};

// A point in the hyperspace: one block family and one width window per stage.
class SearchSpace {
 public:
  SearchSpace(const Hyperspace& hs, std::vector<int> block_index, std::vector<int> width_start);

  const Hyperspace& hyperspace() const { return *hs_; }
  const std::vector<int>& block_index() const { return block_index_; }
  const std::vector<int>& width_start() const { return width_start_; }

  BlockId stage_block(int stage) const;
  const BlockInfo& stage_block_info(int stage) const;
  std::vector<int> stage_widths(int stage) const;

  std::string encode() const;
  static SearchSpace decode(const std::string& text, const Hyperspace& hs);

 private:
  const Hyperspace* hs_;
  std::vector<int> block_index_;  // index into stage.block_choices
  std::vector<int> width_start_;  // window start on the stage ladder
};

// ---- concrete architectures ----

struct LayerChoice {
  int kernel = 3;
  int width = 0;
  double expand = 1.0;
};

struct StageConfig {
  BlockId type{};
  std::string activation;
  int stride = 1;
  std::vector<LayerChoice> layers;
};

struct StemConfig {
  int conv_width = 0;
  int conv_kernel = 3;
  int conv_stride = 2;
  std::string conv_activation = "relu";
  BlockId block_type{};
  std::string block_activation = "relu";
  int block_kernel = 3;
  double block_expand = 1.0;
  std::vector<int> block_widths;
};

struct Architecture {
  int resolution = 0;
  int granularity = 8;
  std::string hyperspace_id;   // provenance, may be empty
  std::string space_encoding;  // provenance, may be empty
  StemConfig stem;
  std::vector<StageConfig> stages;
  HeadSpec head;

  nlohmann::json to_json() const;
  static Architecture from_json(const nlohmann::json& j);
  static Architecture load(const std::filesystem::path& p);
  void save(const std::filesystem::path& p) const;

  // Canonical single-line description; identical iff the architectures are.
  std::string describe() const;
};

std::string encode_space(const SearchSpace& space);
SearchSpace decode_space(const std::string& text, const Hyperspace& hs);

Architecture sample_architecture(const SearchSpace& space, RngStream& rng);
Architecture min_architecture(const SearchSpace& space);
Architecture max_architecture(const SearchSpace& space);

// Uniform draw over the hyperspace's spaces.
SearchSpace random_space(const Hyperspace& hs, RngStream& rng);

BigInt space_cardinality(const SearchSpace& space);

// Every search space of the hyperspace, ordered stage-major. Refuses
// hyperspaces with more than `limit` spaces.
std::vector<SearchSpace> enumerate_spaces(const Hyperspace& hs, size_t limit = 1u << 20);

// Empty when the architecture is a member of the space, otherwise the reason.
std::optional<std::string> validate_architecture(const Architecture& arch, const SearchSpace& space);

}  // namespace qnas
