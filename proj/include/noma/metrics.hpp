#pragma once

#include <vector>

#include "noma/system_model.hpp"

namespace noma {

/// Frame-level detection quality. Frame values are unweighted means of the
/// per-slot values.
struct DetectionReport {
  double ser = 0.0;  // symbol errors on the true support
  double pd = 0.0;   // detected fraction of active users
  double pfa = 0.0;  // falsely activated fraction of inactive users
  std::vector<double> ser_per_slot;
  std::vector<double> pd_per_slot;
  std::vector<double> pfa_per_slot;
};

/// Compares an estimated K x J frame against the truth. An active user is
/// "detected" in a slot when its estimate there is nonzero; a symbol error is
/// any mismatch (including a missed user). Throws ShapeMismatchError on shape
/// disagreement and SaturatedSupportError when S = K (false-alarm rate has an
/// empty denominator).
DetectionReport evaluate(const Frame& truth, const CMat& estimate);

/// Raw integer counts over the whole frame (all slots), for aggregation
/// across trials without intermediate division. Same preconditions as
/// evaluate. SER = symbol_errors/(S*J), P_d = detections/(S*J),
/// P_fa = false_alarms/((K-S)*J).
struct ErrorCounts {
  std::uint64_t symbol_errors = 0;
  std::uint64_t detections = 0;
  std::uint64_t false_alarms = 0;
};
ErrorCounts count_errors(const Frame& truth, const CMat& estimate);

/// Normalized sparsity-estimate error |s_true - s_hat| / s_true.
double normalized_error(double s_true, double s_hat);

}  // namespace noma
