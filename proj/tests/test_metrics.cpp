#include <doctest.h>

#include <complex>

#include "noma/errors.hpp"
#include "noma/metrics.hpp"

using namespace noma;

namespace {

Frame make_truth() {
  // K=5, J=2, support {1, 3}.
  Frame f;
  f.symbols = CMat::Zero(5, 2);
  f.support = {1, 3};
  f.symbols(1, 0) = {1.0, 1.0};
  f.symbols(1, 1) = {-1.0, 1.0};
  f.symbols(3, 0) = {-1.0, -1.0};
  f.symbols(3, 1) = {1.0, -1.0};
  return f;
}

}  // namespace

TEST_CASE("perfect estimate scores 1.0 detection, zero errors") {
  Frame t = make_truth();
  auto rep = evaluate(t, t.symbols);
  CHECK(rep.ser == 0.0);
  CHECK(rep.pd == 1.0);
  CHECK(rep.pfa == 0.0);
  REQUIRE(rep.ser_per_slot.size() == 2);
  for (double v : rep.ser_per_slot) CHECK(v == 0.0);
}

TEST_CASE("single wrong symbol in one slot") {
  Frame t = make_truth();
  CMat est = t.symbols;
  est(1, 0) = {-1.0, -1.0};  // wrong symbol, still active
  auto rep = evaluate(t, est);
  // Slot 0: 1 of 2 active symbols wrong; slot 1 clean.
  CHECK(rep.ser_per_slot[0] == doctest::Approx(0.5));
  CHECK(rep.ser_per_slot[1] == 0.0);
  CHECK(rep.ser == doctest::Approx(0.25));
  CHECK(rep.pd == 1.0);
  CHECK(rep.pfa == 0.0);
}

TEST_CASE("missed user counts as both a miss and a symbol error") {
  Frame t = make_truth();
  CMat est = t.symbols;
  est(3, 0) = 0.0;
  est(3, 1) = 0.0;
  auto rep = evaluate(t, est);
  CHECK(rep.pd_per_slot[0] == doctest::Approx(0.5));
  CHECK(rep.pd == doctest::Approx(0.5));
  CHECK(rep.ser == doctest::Approx(0.5));
  CHECK(rep.pfa == 0.0);
}

TEST_CASE("false alarm on an inactive user") {
  Frame t = make_truth();
  CMat est = t.symbols;
  est(0, 1) = {1.0, 1.0};
  auto rep = evaluate(t, est);
  CHECK(rep.pfa_per_slot[0] == 0.0);
  // 1 of K-S = 3 inactive users fires in slot 1.
  CHECK(rep.pfa_per_slot[1] == doctest::Approx(1.0 / 3.0));
  CHECK(rep.pfa == doctest::Approx(1.0 / 6.0));
  CHECK(rep.ser == 0.0);
  CHECK(rep.pd == 1.0);
}

TEST_CASE("counts match report denominators") {
  Frame t = make_truth();
  CMat est = t.symbols;
  est(1, 0) = {-1.0, -1.0};  // symbol error
  est(3, 1) = 0.0;           // miss (also a symbol error)
  est(4, 0) = {1.0, -1.0};   // false alarm
  auto c = count_errors(t, est);
  CHECK(c.symbol_errors == 2);
  CHECK(c.detections == 3);
  CHECK(c.false_alarms == 1);

  auto rep = evaluate(t, est);
  const double sj = 2.0 * 2.0;        // S * J
  const double kj = 3.0 * 2.0;        // (K-S) * J
  CHECK(rep.ser == doctest::Approx(double(c.symbol_errors) / sj));
  CHECK(rep.pd == doctest::Approx(double(c.detections) / sj));
  CHECK(rep.pfa == doctest::Approx(double(c.false_alarms) / kj));
}

TEST_CASE("shape mismatch and saturated support throw") {
  Frame t = make_truth();
  CHECK_THROWS_AS(evaluate(t, CMat::Zero(5, 3)), ShapeMismatchError);
  CHECK_THROWS_AS(evaluate(t, CMat::Zero(4, 2)), ShapeMismatchError);

  Frame full;
  full.symbols = CMat::Ones(3, 1);
  full.support = {0, 1, 2};
  CHECK_THROWS_AS(evaluate(full, full.symbols), SaturatedSupportError);
  CHECK_THROWS_AS(count_errors(full, full.symbols), SaturatedSupportError);
}

TEST_CASE("normalized error") {
  CHECK(normalized_error(40.0, 42.0) == doctest::Approx(0.05));
  CHECK(normalized_error(40.0, 40.0) == 0.0);
  CHECK(normalized_error(10.0, 5.0) == doctest::Approx(0.5));
}
