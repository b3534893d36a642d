#include "noma/sparsity.hpp"

#include <algorithm>
#include <cmath>

#include "noma/errors.hpp"
#include "noma/metrics.hpp"
#include "noma/parallel.hpp"

namespace noma {

std::size_t SparsityEstimate::clamped(std::size_t k) const {
  if (k == 0) throw ConfigError("SparsityEstimate: K must be >= 1");
  return std::min(std::max<std::size_t>(s_hat_rounded, 1), k);
}

SparsityEstimate estimate_sparsity(const CMat& y, double tau) {
  if (!(tau > 0.0)) {
    throw ConfigError("estimate_sparsity: tau must be > 0");
  }
  const auto J = y.cols();
  if (J == 0) throw ConfigError("estimate_sparsity: empty frame");

  SparsityEstimate est;
  est.per_slot.resize(static_cast<std::size_t>(J));
  const double factor = tau / (2.0 * (tau + 1.0));
  double sum = 0.0;
  for (Eigen::Index j = 0; j < J; ++j) {
    const double v = factor * y.col(j).squaredNorm();
    est.per_slot[static_cast<std::size_t>(j)] = v;
    sum += v;
  }
  est.s_hat = sum / static_cast<double>(J);
  est.s_hat_rounded = static_cast<std::size_t>(
      std::llround(std::max(est.s_hat, 0.0)));
  return est;
}

std::vector<EstimatorSweepPoint> estimator_error_sweep(
    std::size_t k, std::size_t s, const std::vector<double>& snr_grid,
    const std::vector<std::size_t>& m_grid,
    const std::vector<std::size_t>& j_grid, std::size_t trials,
    std::uint64_t seed) {
  if (snr_grid.empty() || m_grid.empty() || j_grid.empty()) {
    throw ConfigError("estimator_error_sweep: empty grid");
  }
  if (trials == 0) throw ConfigError("estimator_error_sweep: trials >= 1");

  std::vector<EstimatorSweepPoint> table;
  std::uint64_t point_index = 0;
  for (double snr_db : snr_grid) {
    for (std::size_t m : m_grid) {
      for (std::size_t j : j_grid) {
        SystemConfig cfg;
        cfg.K = k;
        cfg.M = m;
        cfg.J = j;
        cfg.S = s;
        cfg.snr_db = snr_db;
        cfg.validate();
        const double tau = linear_snr(snr_db);

        // Per-trial errors land in indexed slots; the reduction below runs
        // in index order, so results are identical however many workers ran.
        std::vector<double> en(trials);
        parallel_for(trials, [&](std::size_t trial) {
          const auto inst = sample_instance(
              cfg, rng::trial_seed(seed, point_index, trial));
          const auto est = estimate_sparsity(inst.rx.Y, tau);
          en[trial] = normalized_error(static_cast<double>(s), est.s_hat);
        });
        double sum = 0.0;
        for (double v : en) sum += v;

        EstimatorSweepPoint point;
        point.snr_db = snr_db;
        point.m = m;
        point.j = j;
        point.trials = trials;
        point.mean_en = sum / static_cast<double>(trials);
        table.push_back(point);
        ++point_index;
      }
    }
  }
  return table;
}

}  // namespace noma
