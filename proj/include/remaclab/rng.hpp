#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace remaclab {

// PCG32 with splitmix64-derived stream selection. (seed, stream) fully
// determines the sequence; distinct streams give unrelated sequences.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0) {
    uint64_t s = splitmix64(seed + 0x9E3779B97F4A7C15ULL * (stream + 1));
    uint64_t inc = splitmix64(s ^ (stream + 0xDA3E39CB94B95BDBULL));
    state_ = 0;
    inc_ = (inc << 1u) | 1u;
    next_u32();
    state_ += s;
    next_u32();
  }

  uint32_t next_u32() {
    uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    uint32_t rot = static_cast<uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31));
  }

  uint64_t next_u64() { return (static_cast<uint64_t>(next_u32()) << 32) | next_u32(); }

  // Uniform in [0, 1).
  double uniform() { return next_u32() * (1.0 / 4294967296.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
    uint32_t span = static_cast<uint32_t>(hi - lo) + 1u;
    // Rejection sampling to avoid modulo bias.
    uint32_t limit = UINT32_MAX - (UINT32_MAX % span);
    uint32_t v;
    do {
      v = next_u32();
    } while (v >= limit);
    return lo + static_cast<int>(v % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller with a cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 1e-300);
    u2 = uniform();
    double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return mag * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Independent child stream, e.g. per component or per episode.
  Rng split(uint64_t tag) const { return Rng(splitmix64(state_ ^ inc_), tag); }

  static uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

 private:
  uint64_t state_ = 0;
  uint64_t inc_ = 1;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Fixed stream ids so components never share a sequence by accident.
namespace streams {
constexpr uint64_t kData = 1;
constexpr uint64_t kInit = 2;
constexpr uint64_t kCurriculum = 3;
constexpr uint64_t kDelayModel = 4;
constexpr uint64_t kEpisode = 5;
constexpr uint64_t kPolicy = 6;
}  // namespace streams

}  // namespace remaclab
