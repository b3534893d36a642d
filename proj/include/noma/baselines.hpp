#pragma once

#include <cstddef>
#include <vector>

#include "noma/linalg.hpp"
#include "noma/system_model.hpp"

namespace noma {

/// Knobs shared by the classical recovery baselines.
struct RecoverySettings {
  std::size_t sparsity = 0;     // detectors recover exactly this many users
  std::size_t max_iters = 500;  // BPDN iteration cap
  double bpdn_lambda = 0.0;     // must be >= 0; see default_bpdn_lambda
  double bpdn_tol = 1e-8;       // relative objective decrease stop
  bool per_slot_omp = false;    // SOMP: independent per-slot supports
};

/// Support-restricted least squares on all J slots jointly, then
/// nearest-symbol mapping. Rows outside the support stay zero. The support
/// must contain valid, unique user indices.
Frame oracle_ls(const CMat& y, const CMat& h,
                const std::vector<std::size_t>& support);

/// Simultaneous orthogonal matching pursuit: greedy support growth with the
/// joint residual score sum_j |h_k^H r_j|^2 / ||h_k||^2 and a full LS
/// re-solve each round. per_slot_omp switches to independent per-slot OMP
/// (supports may then differ across slots).
Frame somp_detect(const CMat& y, const CMat& h,
                  const RecoverySettings& settings);

struct BpdnResult {
  Frame frame;                   // hard estimate after debias + mapping
  CMat raw;                      // converged convex solution (K x J)
  std::vector<double> objective; // value per iteration (including iter 0)
  bool converged = false;
};

/// Row-sparse basis-pursuit denoising
///   min_X  0.5 ||Y - H X||_F^2 + lambda * sum_k ||X_{k,:}||_2
/// solved by proximal gradient descent (ISTA) with a power-iteration step
/// size. Debias: keep the sparsity largest nonzero rows, re-solve restricted
/// LS, map to the nearest symbols.
BpdnResult bpdn_recover(const CMat& y, const CMat& h,
                        const RecoverySettings& settings);

/// Noise-scaled default regularizer:
///   sigma * sqrt(2 ln K) * median_k ||h_k||_2 * sqrt(J).
double default_bpdn_lambda(double sigma_sq, const CMat& h, std::size_t j);

}  // namespace noma
