#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace noma::rng {

/// SplitMix64 step. Used for seed derivation and hashing, never as the
/// simulation generator itself.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Order-dependent combine of two 64-bit values into a fresh seed.
inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a;
  std::uint64_t h = splitmix64(s);
  s = h ^ b;
  return splitmix64(s);
}

/// Named per-component RNG streams. Components seeded from different streams
/// of the same trial seed are independently reproducible.
enum class StreamTag : std::uint64_t {
  kChannel = 0x6368616e6e656cULL,    // fading gains + spreading sequence
  kData = 0x64617461ULL,             // support + QPSK payload
  kNoise = 0x6e6f697365ULL,          // receiver noise
  kLatent = 0x6c6174656e74ULL,       // latent initialization / weight init
};

/// Deterministic random stream: mt19937_64 engine with hand-rolled
/// distributions so every drawn value is identical across platforms and
/// standard-library versions.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (pairs cached).
  double normal();

  /// Circularly symmetric complex normal CN(0,1): Re, Im ~ N(0, 1/2).
  std::complex<double> cnormal();

  /// Uniform integer in [0, n), unbiased (rejection sampling). n > 0.
  std::uint64_t below(std::uint64_t n);

  /// One Rademacher value: +1 or -1 with equal probability.
  double rademacher() { return (next_u64() >> 63) ? 1.0 : -1.0; }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Seed for one named component of a trial.
inline std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag) {
  return mix(seed, static_cast<std::uint64_t>(tag));
}

/// Stream for one named component of a trial.
inline Stream derive_stream(std::uint64_t seed, StreamTag tag) {
  return Stream(derive_seed(seed, tag));
}

/// Per-trial seed inside a sweep: hash(master, point, trial).
inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t point,
                                std::uint64_t trial) {
  return mix(mix(master, point), trial);
}

}  // namespace noma::rng
