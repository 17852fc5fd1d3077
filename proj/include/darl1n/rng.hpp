#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace darl1n {

// Deterministic random stream (SplitMix64). We avoid std::mt19937 because the
// exact sequence must be reproducible across builds, hosts, and transports;
// the generator is part of the protocol, not an implementation detail.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller without caching the second value: one gaussian consumes two
  // uniforms, so the draw count per sample is fixed and replayable.
  double gaussian(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(6.283185307179586477 * u2);
  }

  // uniform index in [0, n)
  size_t pick(size_t n) {
    if (n == 0) throw std::invalid_argument("pick from empty range");
    return static_cast<size_t>(uniform() * static_cast<double>(n));
  }

 private:
  uint64_t state_;
};

// Stable two-word hash used to derive named substreams from the run seed.
// Every random decision in a run is drawn from derive_stream(seed, a, b) for
// some documented (a, b), which makes runs replayable piecewise: a learner
// can be re-run for one iteration without replaying the whole run.
inline uint64_t derive_stream(uint64_t seed, uint64_t a, uint64_t b) {
  uint64_t h = seed ^ 0x8824a3d7340ab631ull;
  for (uint64_t x : {a, b}) {
    h ^= x + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
  }
  return h;
}

// Reserved stream tags (values above 2^32 so they never collide with
// iteration numbers used in the same slot).
namespace stream {
constexpr uint64_t kPolicyInit = 0x100000001ull;
constexpr uint64_t kCriticInit = 0x100000002ull;
constexpr uint64_t kEval = 0x100000003ull;
constexpr uint64_t kWorldInit = 0x100000004ull;
constexpr uint64_t kBench = 0x100000005ull;
}  // namespace stream

}  // namespace darl1n
