#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace sparc {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derive a decorrelated stream seed from (base, tag). Tags name the
/// stream's purpose ("env/0", "act/0", "batch", "init/expert", ...).
inline std::uint64_t seed_stream(std::uint64_t base, std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the tag
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t s = base ^ h;
  splitmix64(s);
  return splitmix64(s);
}

/// Deterministic stream with hand-rolled distributions so that draw
/// consumption is pinned (2 uniforms per normal, no cached spare).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(gen_() % n);
  }

  /// Standard normal via Box-Muller (cosine branch only).
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace sparc
