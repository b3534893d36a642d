#include "noma/metrics.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "noma/errors.hpp"

namespace noma {

namespace {

void check_shapes(const Frame& truth, const CMat& estimate) {
  const auto K = truth.symbols.rows();
  const auto J = truth.symbols.cols();
  if (estimate.rows() != K || estimate.cols() != J) {
    throw ShapeMismatchError(
        "evaluate: truth " + std::to_string(K) + "x" + std::to_string(J) +
        " vs estimate " + std::to_string(estimate.rows()) + "x" +
        std::to_string(estimate.cols()));
  }
  if (truth.support.size() == static_cast<std::size_t>(K)) {
    throw SaturatedSupportError(
        "evaluate: S = K leaves no inactive users for the false-alarm rate");
  }
}

struct SlotCounts {
  long err = 0;
  long det = 0;
  long fa = 0;
};

SlotCounts count_slot(const Frame& truth, const CMat& estimate,
                      const std::vector<char>& active, Eigen::Index j) {
  SlotCounts c;
  const auto K = truth.symbols.rows();
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto est = estimate(k, j);
    const bool est_active = est != std::complex<double>(0.0, 0.0);
    if (active[static_cast<std::size_t>(k)]) {
      if (est_active) ++c.det;
      if (est != truth.symbols(k, j)) ++c.err;
    } else if (est_active) {
      ++c.fa;
    }
  }
  return c;
}

std::vector<char> active_mask(const Frame& truth) {
  std::vector<char> active(static_cast<std::size_t>(truth.symbols.rows()), 0);
  for (std::size_t k : truth.support) {
    if (k >= active.size()) {
      throw ShapeMismatchError("evaluate: support index " + std::to_string(k) +
                               " out of range");
    }
    active[k] = 1;
  }
  return active;
}

}  // namespace

DetectionReport evaluate(const Frame& truth, const CMat& estimate) {
  check_shapes(truth, estimate);
  const auto K = truth.symbols.rows();
  const auto J = truth.symbols.cols();
  const auto S = static_cast<double>(truth.support.size());
  const auto inactive = static_cast<double>(K) - S;
  const std::vector<char> active = active_mask(truth);

  DetectionReport rep;
  rep.ser_per_slot.resize(static_cast<std::size_t>(J));
  rep.pd_per_slot.resize(static_cast<std::size_t>(J));
  rep.pfa_per_slot.resize(static_cast<std::size_t>(J));

  for (Eigen::Index j = 0; j < J; ++j) {
    const SlotCounts c = count_slot(truth, estimate, active, j);
    const auto sj = static_cast<std::size_t>(j);
    rep.ser_per_slot[sj] = static_cast<double>(c.err) / S;
    rep.pd_per_slot[sj] = static_cast<double>(c.det) / S;
    rep.pfa_per_slot[sj] = static_cast<double>(c.fa) / inactive;
  }

  // Frame values: unweighted per-slot means.
  double ser = 0.0, pd = 0.0, pfa = 0.0;
  for (std::size_t j = 0; j < rep.ser_per_slot.size(); ++j) {
    ser += rep.ser_per_slot[j];
    pd += rep.pd_per_slot[j];
    pfa += rep.pfa_per_slot[j];
  }
  rep.ser = ser / static_cast<double>(J);
  rep.pd = pd / static_cast<double>(J);
  rep.pfa = pfa / static_cast<double>(J);
  return rep;
}

ErrorCounts count_errors(const Frame& truth, const CMat& estimate) {
  check_shapes(truth, estimate);
  const std::vector<char> active = active_mask(truth);
  ErrorCounts total;
  for (Eigen::Index j = 0; j < truth.symbols.cols(); ++j) {
    const SlotCounts c = count_slot(truth, estimate, active, j);
    total.symbol_errors += static_cast<std::uint64_t>(c.err);
    total.detections += static_cast<std::uint64_t>(c.det);
    total.false_alarms += static_cast<std::uint64_t>(c.fa);
  }
  return total;
}

double normalized_error(double s_true, double s_hat) {
  if (s_true <= 0.0) throw ConfigError("normalized_error: s_true must be > 0");
  return std::abs(s_true - s_hat) / s_true;
}

}  // namespace noma
