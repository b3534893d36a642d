#pragma once

#include <cstdint>
#include <vector>

#include "noma/system_model.hpp"

namespace noma {

/// Closed-form second-moment sparsity estimate from a received frame.
struct SparsityEstimate {
  double s_hat = 0.0;                // frame estimate, mean over slots
  std::size_t s_hat_rounded = 0;     // nearest non-negative integer
  std::vector<double> per_slot;      // raw per-slot estimates

  /// Detector-facing value: rounded estimate clamped to [1, K].
  std::size_t clamped(std::size_t k) const;
};

/// Shat = (1/J) sum_j [tau / (2 (tau + 1))] ||y_j||^2, where tau is the
/// linear SNR. Unbiased under this artifact's power normalization, where
/// E||y_j||^2 = 2S (tau + 1) / tau.
SparsityEstimate estimate_sparsity(const CMat& y, double tau);

struct EstimatorSweepPoint {
  double snr_db = 0.0;
  std::size_t m = 0;
  std::size_t j = 0;
  std::size_t trials = 0;
  double mean_en = 0.0;  // mean |S - Shat| / S over trials
};

/// Mean normalized estimator error over a grid (cartesian product of the
/// SNR, M and J lists) at fixed K and S. Grid points and trials are
/// independently seeded; results do not depend on evaluation order.
std::vector<EstimatorSweepPoint> estimator_error_sweep(
    std::size_t k, std::size_t s, const std::vector<double>& snr_grid,
    const std::vector<std::size_t>& m_grid,
    const std::vector<std::size_t>& j_grid, std::size_t trials,
    std::uint64_t seed);

}  // namespace noma
