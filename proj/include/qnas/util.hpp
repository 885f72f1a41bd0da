#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace qnas {

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& content);

// Shortest decimal form that round-trips a double exactly ("%.17g" trimmed).
std::string fmt_double(double v);

std::vector<std::string> split(const std::string& s, char sep);

// Hex SHA-256 of a file's bytes (for run manifests).
std::string sha256_file(const std::filesystem::path& p);
std::string sha256_bytes(const std::string& data);

inline int round_up(int value, int multiple) {
  if (multiple <= 0) return value;
  return ((value + multiple - 1) / multiple) * multiple;
}

inline int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace qnas
