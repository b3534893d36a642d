#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "noma/linalg.hpp"
#include "noma/rng.hpp"

namespace noma {

using linalg::CMat;
using linalg::RMat;

/// Uplink scenario parameters. K users share M subcarriers (M < K allowed:
/// overloaded system), S of them active through a frame of J slots.
struct SystemConfig {
  std::size_t K = 200;   // users
  std::size_t M = 100;   // subcarriers
  std::size_t J = 7;     // slots per frame
  std::size_t S = 40;    // active users
  double snr_db = 10.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError on invariant violation (0 < S <= K, M >= 1, J >= 1).
  void validate() const;
};

/// Real Toeplitz spreading matrix with entries +-1/sqrt(M). Entry (m, k)
/// depends only on k - m; every column has unit l2 norm.
struct SpreadingMatrix {
  RMat entries;  // M x K

  /// Built from a seeded Rademacher sequence of length M + K - 1 laid along
  /// the diagonals: entries(m, k) = seq[k - m + M - 1] / sqrt(M).
  static SpreadingMatrix toeplitz_rademacher(std::size_t m, std::size_t k,
                                             rng::Stream& rng);
};

/// Rayleigh fading gains and the effective channel h_mk = g_mk * s_mk.
struct ChannelMatrix {
  CMat gains;      // M x K, entries ~ CN(0,1)
  CMat effective;  // M x K

  static ChannelMatrix from_gains(CMat gains, const SpreadingMatrix& spreading);
};

ChannelMatrix sample_channel(const SystemConfig& cfg,
                             const SpreadingMatrix& spreading,
                             rng::Stream& rng);

/// Gray-mapped QPSK: (0,0) -> 1+i, (0,1) -> -1+i, (1,1) -> -1-i,
/// (1,0) -> 1-i. Symbol power |x|^2 = 2.
std::complex<double> qpsk_modulate(int b0, int b1);

/// Quadrant decision: independent signs of Re and Im.
std::complex<double> nearest_qpsk(std::complex<double> v);

inline constexpr std::complex<double> kQpskAlphabet[4] = {
    {1.0, 1.0}, {-1.0, 1.0}, {-1.0, -1.0}, {1.0, -1.0}};

/// K x J transmitted frame: rows outside the (sorted) support are all zero,
/// the support is common to all J slots, nonzeros are constellation symbols.
struct Frame {
  CMat symbols;                      // K x J
  std::vector<std::size_t> support;  // sorted, size S

  std::size_t sparsity() const { return support.size(); }
};

/// Support uniform among size-S subsets; active entries i.i.d. uniform QPSK.
Frame sample_frame(const SystemConfig& cfg, rng::Stream& rng);

double linear_snr(double snr_db);

/// Per-complex-sample noise variance sigma^2 = 2S / (M * tau) making the
/// per-slot received signal-to-noise power ratio equal tau.
double noise_variance_for_snr(const SystemConfig& cfg);

struct ReceivedFrame {
  CMat Y;          // M x J
  double sigma_sq; // per-complex-sample noise variance (0 = noiseless hook)
  double tau;      // linear SNR
};

/// Y = H X + N, N entries i.i.d. CN(0, sigma_sq). sigma_sq = 0 transmits
/// noiselessly (test hook).
ReceivedFrame transmit(const Frame& frame, const ChannelMatrix& channel,
                       double sigma_sq, double tau, rng::Stream& rng);

/// One realized simulation draw: channel, transmitted frame, received frame.
struct Instance {
  ChannelMatrix channel;
  Frame frame;
  ReceivedFrame rx;
};

/// Deterministic draw from the named component streams of `seed`: spreading
/// and gains from the channel stream, support and symbols from the data
/// stream, receiver noise from the noise stream at cfg.snr_db.
Instance sample_instance(const SystemConfig& cfg, std::uint64_t seed);

/// One fully realized scenario for regression fixtures: everything needed to
/// reproduce Y bit-exactly.
struct Scenario {
  SystemConfig cfg;
  std::uint64_t spreading_seed = 0;
  CMat gains;  // M x K
  Frame frame;
  CMat noise;  // M x J
};

/// Samples a scenario from cfg.seed using the named component streams.
Scenario make_scenario(const SystemConfig& cfg);

/// Deterministic replay: Y = (gains o spreading) * X + noise.
ReceivedFrame realize(const Scenario& sc);

/// Versioned JSON fixture files.
void save_scenario(const Scenario& sc, const std::string& path);
Scenario load_scenario(const std::string& path);

}  // namespace noma
