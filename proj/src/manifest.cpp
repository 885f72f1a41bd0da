#include "qnas/manifest.hpp"

#include "qnas/util.hpp"
#include "qnas/version.hpp"

namespace qnas {

using nlohmann::json;

void RunManifest::add_input(const std::string& role, const std::filesystem::path& p) {
  inputs.push_back({role, p.string(), sha256_file(p)});
}

json RunManifest::to_json() const {
  json j;
  j["version"] = kFormatVersion;
  j["artifact_version"] = kArtifactVersion;
  j["command"] = command;
  j["seed"] = seed;
  j["config"] = config;
  json ins = json::array();
  for (const auto& in : inputs)
    ins.push_back({{"role", in.role}, {"path", in.path}, {"sha256", in.sha256}});
  j["inputs"] = std::move(ins);
  return j;
}

void RunManifest::write(const std::filesystem::path& p) const {
  write_file(p, to_json().dump(2) + "\n");
}

}  // namespace qnas
