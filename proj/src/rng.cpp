#include "noma/rng.hpp"

#include <cmath>

namespace noma::rng {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

double Stream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // Box-Muller on (0,1] x [0,1).
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(kTwoPi * u2);
  have_spare_ = true;
  return r * std::cos(kTwoPi * u2);
}

std::complex<double> Stream::cnormal() {
  // One Box-Muller pair scaled so E|z|^2 = 1.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-std::log(u1));
  return {r * std::cos(kTwoPi * u2), r * std::sin(kTwoPi * u2)};
}

std::uint64_t Stream::below(std::uint64_t n) {
  // Rejection below the largest multiple of n.
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

}  // namespace noma::rng
