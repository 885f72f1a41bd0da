#pragma once

#include <cassert>
#include <cstdint>
#include <random>
#include <vector>

namespace qnas {

// splitmix64 finalizer. Used for seed derivation and for order-independent
// per-key noise, so results never depend on iteration order.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) { return splitmix64(splitmix64(a) ^ (b + 0x9e3779b97f4a7c15ULL)); }

inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) { return mix_seed(mix_seed(a, b), c); }

// Hash of a byte string into the same seed domain.
inline uint64_t hash_bytes(uint64_t seed, const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = splitmix64(seed ^ (0x51f0ull + n));
  for (size_t i = 0; i < n; ++i) h = splitmix64(h ^ p[i]);
  return h;
}

// Deterministic uniform stream. std::mt19937_64 output is fully specified by
// the standard; the distribution helpers below are hand-rolled because
// std::uniform_int_distribution is implementation-defined and would break
// golden files across toolchains.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : seed_(seed), engine_(seed) {}

  uint64_t seed() const { return seed_; }

  uint64_t next_u64() { return engine_(); }

  // Unbiased index in [0, n) via Lemire's multiply-shift rejection method.
  size_t index(size_t n) {
    assert(n > 0);
    uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto lo = static_cast<uint64_t>(m);
    if (lo < n) {
      uint64_t t = (0 - n) % n;
      while (lo < t) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * n;
        lo = static_cast<uint64_t>(m);
      }
    }
    return static_cast<size_t>(m >> 64);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Inclusive integer range.
  int range(int lo, int hi) {
    assert(lo <= hi);
    return lo + static_cast<int>(index(static_cast<size_t>(hi - lo) + 1));
  }

  bool chance(double p) { return unit() < p; }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    assert(!v.empty());
    return v[index(v.size())];
  }

  // k distinct indices from [0, n), order randomized (partial Fisher-Yates).
  std::vector<size_t> sample_indices(size_t n, size_t k) {
    assert(k <= n);
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    for (size_t i = 0; i < k; ++i) {
      size_t j = i + index(n - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
  }

  // Independent substream; derivation depends only on the original seed.
  RngStream fork(uint64_t salt) const { return RngStream(mix_seed(seed_, salt)); }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
};

// Order-independent noise in [-1, 1) keyed by (seed, key).
inline double keyed_noise(uint64_t seed, uint64_t key) {
  uint64_t h = splitmix64(splitmix64(seed) ^ splitmix64(key));
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

}  // namespace qnas
