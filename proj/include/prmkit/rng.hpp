#pragma once

#include <cmath>
#include <cstdint>

namespace prmkit {

// Finalizer of the splitmix64 generator (Steele, Lea & Flood 2014).
// Bijective on 64-bit values.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t kStreamGamma = 0x9E3779B97F4A7C15ull;

// Seed of the independent stream for task `task_index` under `master_seed`.
//
// Construction: the splitmix64 state sequence seeded at `master_seed` is
// state_i = master_seed + (i+1)*gamma; the stream seed is the finalized
// state. gamma is odd, so for fixed master_seed all task indices map to
// distinct states, and mix64 is bijective, so to distinct seeds. The value
// depends only on (master_seed, task_index) — never on worker layout.
constexpr std::uint64_t derive_rng_stream(std::uint64_t master_seed,
                                          std::uint64_t task_index) {
  return mix64(master_seed + (task_index + 1) * kStreamGamma);
}

// Sequential splitmix64 generator. Fully specified here so outputs are
// bit-identical across platforms and build modes; no std distribution
// (whose mapping is implementation-defined) is used anywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += kStreamGamma;
    return mix64(state_);
  }

  // Uniform in [0, 1), 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return next_unit() < p; }

  // Uniform in [0, bound); bound > 0. Lemire multiply-shift reduction.
  std::uint64_t next_below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

  // Uniform integer in [lo, hi], inclusive.
  std::int64_t next_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(
                    next_below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  double next_in(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Standard normal via Box-Muller; consumes exactly two uniforms per call.
  double next_gaussian() {
    const double u1 = 1.0 - next_unit();  // (0, 1]
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace prmkit
