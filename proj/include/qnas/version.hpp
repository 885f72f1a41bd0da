#pragma once

namespace qnas {

inline constexpr const char* kArtifactVersion = "0.1.0";

// Bumped whenever an on-disk schema changes incompatibly. Readers reject
// anything newer than what they know.
inline constexpr int kFormatVersion = 1;

}  // namespace qnas
