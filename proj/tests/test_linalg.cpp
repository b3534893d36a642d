#include <doctest.h>

#include <complex>

#include "noma/errors.hpp"
#include "noma/linalg.hpp"

using namespace noma;
using linalg::CMat;
using linalg::RMat;

namespace {
constexpr std::complex<double> I{0.0, 1.0};
}

TEST_CASE("real embedding commutes with multiplication") {
  CMat h(2, 3);
  h << 1.0 + 2.0 * I, -0.5, 3.0 * I, 0.25 - I, 2.0, -1.0 + 0.5 * I;
  CMat x(3, 4);
  x.setZero();
  x(0, 0) = 1.0 + I;
  x(1, 2) = -2.0;
  x(2, 3) = 0.5 * I;

  RMat lhs = linalg::real_embed_matrix(h) * linalg::real_embed_stack(x);
  RMat rhs = linalg::real_embed_stack(h * x);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);

  CMat back = linalg::complex_from_stack(linalg::real_embed_stack(x));
  CHECK((back - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("real embedding block layout") {
  CMat h(1, 1);
  h(0, 0) = 3.0 + 4.0 * I;
  RMat hr = linalg::real_embed_matrix(h);
  REQUIRE(hr.rows() == 2);
  REQUIRE(hr.cols() == 2);
  CHECK(hr(0, 0) == 3.0);
  CHECK(hr(0, 1) == -4.0);
  CHECK(hr(1, 0) == 4.0);
  CHECK(hr(1, 1) == 3.0);
}

TEST_CASE("least squares recovers an exact solution") {
  CMat a(4, 2);
  a << 1.0, 0.0, 0.0, 1.0, 1.0 + I, 2.0, -I, 1.0 - I;
  CMat w(2, 3);
  w << 0.5, -I, 2.0, 1.0 + 0.5 * I, 0.0, -1.0;
  CMat b = a * w;
  CMat w_hat = linalg::least_squares(a, b);
  CHECK((w_hat - w).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("least squares rejects rank deficient systems") {
  CMat a(3, 2);
  a.col(0) << 1.0, 2.0, 3.0 * I;
  a.col(1) = 2.0 * a.col(0);
  CMat b = CMat::Ones(3, 1);
  CHECK_THROWS_AS(linalg::least_squares(a, b), RankDeficientError);

  CMat zero = CMat::Zero(3, 2);
  CHECK_THROWS_AS(linalg::least_squares(zero, b), RankDeficientError);
}

TEST_CASE("least squares shape mismatch") {
  CMat a = CMat::Identity(3, 3);
  CMat b = CMat::Ones(4, 1);
  CHECK_THROWS_AS(linalg::least_squares(a, b), ShapeMismatchError);
}

TEST_CASE("matmul checks inner dimensions") {
  CMat a = CMat::Ones(2, 3);
  CMat b = CMat::Ones(3, 2);
  CHECK(linalg::matmul(a, b)(0, 0) == std::complex<double>(3.0, 0.0));
  CHECK_THROWS_AS(linalg::matmul(a, a), ShapeMismatchError);
}

TEST_CASE("frobenius norm and hermitian") {
  CMat a(2, 2);
  a << 1.0 + I, 0.0, 2.0, -I;
  CHECK(linalg::frobenius_norm_sq(a) == doctest::Approx(2.0 + 4.0 + 1.0));
  CMat ah = linalg::hermitian(a);
  CHECK(ah(0, 0) == std::complex<double>(1.0, -1.0));
  CHECK(ah(0, 1) == std::complex<double>(2.0, 0.0));
  CHECK(ah(1, 1) == std::complex<double>(0.0, 1.0));
}

TEST_CASE("all_finite flags NaN and infinity") {
  RMat r = RMat::Zero(2, 2);
  CHECK(linalg::all_finite(r));
  r(1, 0) = std::numeric_limits<double>::infinity();
  CHECK_FALSE(linalg::all_finite(r));

  CMat c = CMat::Zero(2, 2);
  CHECK(linalg::all_finite(c));
  c(0, 1) = std::complex<double>(0.0, std::nan(""));
  CHECK_FALSE(linalg::all_finite(c));
}
