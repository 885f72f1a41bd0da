#pragma once

#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

namespace qnas {

// Reproducibility record emitted alongside command outputs. Contains no
// timestamps or host details, so reruns of the same inputs are byte-identical.
struct RunManifest {
  std::string command;
  uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();

  struct Input {
    std::string role;
    std::string path;
    std::string sha256;
  };
  std::vector<Input> inputs;

  void add_input(const std::string& role, const std::filesystem::path& p);
  nlohmann::json to_json() const;
  void write(const std::filesystem::path& p) const;
};

}  // namespace qnas
