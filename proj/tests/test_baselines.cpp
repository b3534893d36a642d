#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "noma/baselines.hpp"
#include "noma/errors.hpp"
#include "noma/metrics.hpp"
#include "noma/rng.hpp"
#include "noma/system_model.hpp"

using namespace noma;

namespace {

Instance noiseless_instance(SystemConfig cfg, std::uint64_t seed) {
  cfg.snr_db = 300.0;  // effectively noiseless via calibration
  Instance inst = sample_instance(cfg, seed);
  return inst;
}

}  // namespace

TEST_CASE("oracle LS is exact on noiseless data") {
  SystemConfig cfg;
  cfg.K = 32;
  cfg.M = 16;
  cfg.S = 3;
  cfg.J = 7;
  for (std::uint64_t t = 0; t < 20; ++t) {
    auto inst = noiseless_instance(cfg, 1000 + t);
    Frame est = oracle_ls(inst.rx.Y, inst.channel.effective,
                          inst.frame.support);
    auto rep = evaluate(inst.frame, est.symbols);
    CHECK(rep.ser == 0.0);
    CHECK(rep.pd == 1.0);
    CHECK(rep.pfa == 0.0);
  }
}

TEST_CASE("oracle LS at very low SNR does no better than chance") {
  SystemConfig cfg;
  cfg.K = 32;
  cfg.M = 16;
  cfg.S = 3;
  cfg.J = 7;
  cfg.snr_db = -30.0;
  double ser_sum = 0.0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    auto inst = sample_instance(cfg, 5000 + t);
    Frame est = oracle_ls(inst.rx.Y, inst.channel.effective,
                          inst.frame.support);
    ser_sum += evaluate(inst.frame, est.symbols).ser;
  }
  // Guessing both QPSK bits wrong 3/4 of the time; allow wide MC slack.
  CHECK(ser_sum / trials > 0.55);
}

TEST_CASE("oracle LS rejects bad supports") {
  SystemConfig cfg;
  cfg.K = 8;
  cfg.M = 4;
  cfg.S = 2;
  cfg.J = 2;
  auto inst = noiseless_instance(cfg, 9);
  const auto& h = inst.channel.effective;
  const auto& y = inst.rx.Y;
  CHECK_THROWS_AS(oracle_ls(y, h, {}), ConfigError);
  CHECK_THROWS_AS(oracle_ls(y, h, {0, 8}), ConfigError);
  CHECK_THROWS_AS(oracle_ls(y, h, {3, 3}), ConfigError);
}

TEST_CASE("somp finds a single active user every time") {
  SystemConfig cfg;
  cfg.K = 32;
  cfg.M = 16;
  cfg.S = 1;
  cfg.J = 3;
  RecoverySettings settings;
  settings.sparsity = 1;
  for (std::uint64_t t = 0; t < 100; ++t) {
    auto inst = noiseless_instance(cfg, 42 + t);
    Frame est = somp_detect(inst.rx.Y, inst.channel.effective, settings);
    REQUIRE(est.support.size() == 1);
    CHECK(est.support == inst.frame.support);
    CHECK(evaluate(inst.frame, est.symbols).ser == 0.0);
  }
}

TEST_CASE("somp recovers the exact support nearly always (noiseless)") {
  SystemConfig cfg;
  cfg.K = 32;
  cfg.M = 16;
  cfg.S = 3;
  cfg.J = 7;
  RecoverySettings settings;
  settings.sparsity = 3;
  int exact = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    auto inst = noiseless_instance(cfg, 777 + std::uint64_t(t));
    Frame est = somp_detect(inst.rx.Y, inst.channel.effective, settings);
    exact += est.support == inst.frame.support;
  }
  CHECK(exact >= 990);
}

TEST_CASE("somp on zero measurements returns the all-zero frame") {
  SystemConfig cfg;
  cfg.K = 16;
  cfg.M = 8;
  cfg.S = 2;
  cfg.J = 2;
  auto inst = noiseless_instance(cfg, 3);
  RecoverySettings settings;
  settings.sparsity = 2;
  CMat zero_y = CMat::Zero(8, 2);
  Frame est = somp_detect(zero_y, inst.channel.effective, settings);
  CHECK(est.support.empty());
  CHECK(est.symbols.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("per-slot omp unions the slot supports") {
  SystemConfig cfg;
  cfg.K = 32;
  cfg.M = 16;
  cfg.S = 3;
  cfg.J = 4;
  RecoverySettings settings;
  settings.sparsity = 3;
  settings.per_slot_omp = true;
  auto inst = noiseless_instance(cfg, 88);
  Frame est = somp_detect(inst.rx.Y, inst.channel.effective, settings);
  // Noiseless with a common true support: per-slot OMP should agree.
  CHECK(est.support == inst.frame.support);
  CHECK(evaluate(inst.frame, est.symbols).ser == 0.0);
}

TEST_CASE("bpdn with lambda 0 solves the unregularized problem") {
  SystemConfig cfg;
  cfg.K = 12;
  cfg.M = 16;  // overdetermined so X is identified without the penalty
  cfg.S = 3;
  cfg.J = 3;
  auto inst = noiseless_instance(cfg, 11);
  RecoverySettings settings;
  settings.sparsity = 3;
  settings.max_iters = 4000;
  settings.bpdn_lambda = 0.0;
  settings.bpdn_tol = 1e-14;
  auto res = bpdn_recover(inst.rx.Y, inst.channel.effective, settings);
  CHECK((res.raw - inst.frame.symbols).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(evaluate(inst.frame, res.frame.symbols).ser == 0.0);
}

TEST_CASE("bpdn with huge lambda returns the all-zero raw solution") {
  SystemConfig cfg;
  cfg.K = 16;
  cfg.M = 8;
  cfg.S = 2;
  cfg.J = 2;
  auto inst = noiseless_instance(cfg, 13);
  RecoverySettings settings;
  settings.sparsity = 2;
  // lambda >= max_k ||h_k^H Y|| makes 0 the exact minimizer.
  double lambda_max = 0.0;
  const auto corr = inst.channel.effective.adjoint() * inst.rx.Y;
  for (long k = 0; k < corr.rows(); ++k)
    lambda_max = std::max(lambda_max, corr.row(k).norm());
  settings.bpdn_lambda = lambda_max * 1.01;
  auto res = bpdn_recover(inst.rx.Y, inst.channel.effective, settings);
  CHECK(res.raw.cwiseAbs().maxCoeff() == 0.0);
  // Debias still produces a size-S guess via the correlation fallback.
  CHECK(res.frame.support.size() == 2);
}

TEST_CASE("bpdn objective is monotonically non-increasing") {
  SystemConfig cfg;
  cfg.K = 24;
  cfg.M = 12;
  cfg.S = 4;
  cfg.J = 3;
  cfg.snr_db = 8.0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    auto inst = sample_instance(cfg, 600 + t);
    RecoverySettings settings;
    settings.sparsity = 4;
    settings.max_iters = 60;
    settings.bpdn_lambda = default_bpdn_lambda(
        inst.rx.sigma_sq, inst.channel.effective, cfg.J);
    auto res = bpdn_recover(inst.rx.Y, inst.channel.effective, settings);
    REQUIRE(res.objective.size() >= 2);
    for (std::size_t i = 1; i < res.objective.size(); ++i)
      CHECK(res.objective[i] <= res.objective[i - 1] + 1e-12);
  }
}

TEST_CASE("bpdn recovers the support at moderate SNR") {
  SystemConfig cfg;
  cfg.K = 32;
  cfg.M = 16;
  cfg.S = 3;
  cfg.J = 7;
  cfg.snr_db = 25.0;
  int exact = 0;
  const int trials = 50;
  for (int t = 0; t < trials; ++t) {
    auto inst = sample_instance(cfg, 900 + std::uint64_t(t));
    RecoverySettings settings;
    settings.sparsity = 3;
    settings.max_iters = 2000;
    settings.bpdn_lambda = default_bpdn_lambda(
        inst.rx.sigma_sq, inst.channel.effective, cfg.J);
    auto res = bpdn_recover(inst.rx.Y, inst.channel.effective, settings);
    exact += res.frame.support == inst.frame.support;
  }
  CHECK(exact >= 40);
}

TEST_CASE("bpdn preconditions") {
  CMat y = CMat::Ones(4, 2);
  CMat h = CMat::Identity(4, 4);
  RecoverySettings s;
  s.sparsity = 0;
  CHECK_THROWS_AS(bpdn_recover(y, h, s), ConfigError);
  s.sparsity = 2;
  s.bpdn_lambda = -1.0;
  CHECK_THROWS_AS(bpdn_recover(y, h, s), ConfigError);
  s.bpdn_lambda = 0.0;
  s.max_iters = 0;
  CHECK_THROWS_AS(bpdn_recover(y, h, s), ConfigError);
}

TEST_CASE("default lambda scales like sigma sqrt(J)") {
  CMat h = CMat::Identity(6, 6);
  double l1 = default_bpdn_lambda(1.0, h, 1);
  double l4 = default_bpdn_lambda(1.0, h, 4);
  CHECK(l4 == doctest::Approx(2.0 * l1));
  double lq = default_bpdn_lambda(4.0, h, 1);
  CHECK(lq == doctest::Approx(2.0 * l1));
  // Identity columns have unit norm: lambda = sqrt(2 ln 6).
  CHECK(l1 == doctest::Approx(std::sqrt(2.0 * std::log(6.0))));
}
