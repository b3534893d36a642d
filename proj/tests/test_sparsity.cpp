#include <doctest.h>

#include <cmath>
#include <vector>

#include "noma/errors.hpp"
#include "noma/metrics.hpp"
#include "noma/sparsity.hpp"
#include "noma/system_model.hpp"

using namespace noma;

TEST_CASE("estimate is the exact closed form of the slot norms") {
  CMat y(2, 3);
  y.setZero();
  y(0, 0) = {3.0, 4.0};   // ||y_0||^2 = 25
  y(1, 1) = {0.0, 2.0};   // ||y_1||^2 = 4
  // slot 2 stays zero.
  const double tau = 3.0;
  const double factor = tau / (2.0 * (tau + 1.0));  // 3/8
  auto est = estimate_sparsity(y, tau);
  REQUIRE(est.per_slot.size() == 3);
  CHECK(est.per_slot[0] == doctest::Approx(25.0 * factor));
  CHECK(est.per_slot[1] == doctest::Approx(4.0 * factor));
  CHECK(est.per_slot[2] == 0.0);
  CHECK(est.s_hat == doctest::Approx((25.0 + 4.0) * factor / 3.0));
  CHECK(est.s_hat_rounded == 4);  // 29 * 3/8 / 3 = 3.625
}

TEST_CASE("high snr limit: factor approaches one half") {
  CMat y(1, 1);
  y(0, 0) = {2.0, 0.0};
  auto est = estimate_sparsity(y, 1e12);
  CHECK(est.s_hat == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("estimate is quadratic in the measurement scale") {
  CMat y = CMat::Random(6, 2);
  auto base = estimate_sparsity(y, 2.0);
  auto scaled = estimate_sparsity(CMat(2.0 * y), 2.0);
  CHECK(scaled.s_hat == doctest::Approx(4.0 * base.s_hat));
}

TEST_CASE("invalid tau is rejected") {
  CMat y = CMat::Ones(2, 2);
  CHECK_THROWS_AS(estimate_sparsity(y, 0.0), ConfigError);
  CHECK_THROWS_AS(estimate_sparsity(y, -1.0), ConfigError);
}

TEST_CASE("clamping keeps the detector-facing value in [1, K]") {
  SparsityEstimate est;
  est.s_hat_rounded = 0;
  CHECK(est.clamped(50) == 1);
  est.s_hat_rounded = 75;
  CHECK(est.clamped(50) == 50);
  est.s_hat_rounded = 33;
  CHECK(est.clamped(50) == 33);
}

TEST_CASE("estimator is unbiased at the nominal operating point") {
  SystemConfig cfg;  // K=200, M=100, J=7, S=40, 10 dB
  const double tau = linear_snr(cfg.snr_db);
  const int frames = 10000;
  double sum = 0.0;
  for (int t = 0; t < frames; ++t) {
    auto inst = sample_instance(cfg, 100000 + std::uint64_t(t));
    sum += estimate_sparsity(inst.rx.Y, tau).s_hat;
  }
  double mean = sum / frames;
  CHECK(mean > 39.2);
  CHECK(mean < 40.8);
}

TEST_CASE("slot averaging shrinks the spread like one over sqrt(J)") {
  SystemConfig cfg;
  cfg.K = 200;
  cfg.M = 100;
  cfg.S = 40;
  cfg.snr_db = -6.0;
  const double tau = linear_snr(cfg.snr_db);
  const int trials = 2000;

  auto spread_at = [&](std::size_t j) {
    SystemConfig c = cfg;
    c.J = j;
    double sum = 0.0, sum_sq = 0.0;
    for (int t = 0; t < trials; ++t) {
      auto inst = sample_instance(c, 7000u * j + std::uint64_t(t));
      double s = estimate_sparsity(inst.rx.Y, tau).s_hat;
      sum += s;
      sum_sq += s * s;
    }
    double mean = sum / trials;
    return std::sqrt(sum_sq / trials - mean * mean);
  };

  const double base = spread_at(1);
  for (std::size_t j : {4, 16, 49}) {
    double ratio = base / spread_at(j);
    double expect = std::sqrt(double(j));
    CHECK(std::abs(ratio - expect) / expect < 0.2);
  }
}

TEST_CASE("error sweep covers the grid deterministically") {
  std::vector<double> snr = {0.0, 10.0};
  std::vector<std::size_t> m = {50};
  std::vector<std::size_t> j = {1, 7};
  auto a = estimator_error_sweep(100, 20, snr, m, j, 200, 5);
  auto b = estimator_error_sweep(100, 20, snr, m, j, 200, 5);
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].mean_en == b[i].mean_en);
    CHECK(a[i].trials == 200);
  }
  // Row-major over (snr, m, j): first row is snr=0, j=1.
  CHECK(a[0].snr_db == 0.0);
  CHECK(a[0].j == 1);
  CHECK(a[1].j == 7);
  CHECK(a[2].snr_db == 10.0);

  // More slots average the error down at fixed SNR.
  CHECK(a[1].mean_en < a[0].mean_en);
  CHECK(a[3].mean_en < a[2].mean_en);
}

TEST_CASE("error sweep rejects empty grids") {
  CHECK_THROWS_AS(estimator_error_sweep(100, 20, {}, {50}, {1}, 10, 0),
                  ConfigError);
  CHECK_THROWS_AS(estimator_error_sweep(100, 20, {0.0}, {}, {1}, 10, 0),
                  ConfigError);
  CHECK_THROWS_AS(estimator_error_sweep(100, 20, {0.0}, {50}, {1}, 0, 0),
                  ConfigError);
}
