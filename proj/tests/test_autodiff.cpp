#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "noma/autodiff.hpp"

using noma::ad::Mat;
using noma::ad::Tape;

namespace {

// Central finite difference of a scalar function of one matrix input.
Mat fd_grad(const std::function<double(const Mat&)>& f, const Mat& x,
            double h = 1e-6) {
  Mat g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      Mat xp = x, xm = x;
      xp(i, j) += h;
      xm(i, j) -= h;
      g(i, j) = (f(xp) - f(xm)) / (2.0 * h);
    }
  }
  return g;
}

double max_rel_err(const Mat& a, const Mat& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      double denom = std::max({std::abs(a(i, j)), std::abs(b(i, j)), 1.0});
      worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / denom);
    }
  return worst;
}

Mat arange(Eigen::Index r, Eigen::Index c, double scale) {
  Mat m(r, c);
  double v = -0.7;
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) {
      m(i, j) = std::sin(3.1 * v) * scale;
      v += 0.37;
    }
  return m;
}

}  // namespace

TEST_CASE("forward values of the primitive ops") {
  Tape t;
  Mat a(2, 2), b(2, 2);
  a << 1.0, -2.0, 3.0, 0.5;
  b << 0.5, 1.0, -1.0, 2.0;
  auto ia = t.input(a), ib = t.input(b);
  CHECK(t.value(t.add(ia, ib))(0, 0) == 1.5);
  CHECK(t.value(t.sub(ia, ib))(1, 0) == 4.0);
  CHECK(t.value(t.mul(ia, ib))(1, 1) == 1.0);
  CHECK(t.value(t.matmul(ia, ib))(0, 0) == doctest::Approx(2.5));
  CHECK(t.value(t.transpose(ia))(0, 1) == 3.0);
  CHECK(t.value(t.sum_all(ia))(0, 0) == doctest::Approx(2.5));
  CHECK(t.value(t.mean_rows(ia))(0, 1) == doctest::Approx(-0.75));
  CHECK(t.value(t.leaky_relu(ia, 0.2))(0, 1) == doctest::Approx(-0.4));
  CHECK(t.value(t.tanh(ia))(0, 0) == doctest::Approx(std::tanh(1.0)));
  CHECK(t.value(t.inv_sqrt_eps(t.square(ia), 0.0))(1, 0) ==
        doctest::Approx(1.0 / 3.0));
  CHECK(t.value(t.frob_norm(ia))(0, 0) ==
        doctest::Approx(std::sqrt(1 + 4 + 9 + 0.25)));
  auto st = t.vstack(ia, ib);
  CHECK(t.value(st).rows() == 4);
  CHECK(t.value(t.rows_block(st, 2, 2)) == b);
  CHECK(t.value(t.cols_block(ia, 1, 1))(0, 0) == -2.0);
  auto padded = t.pad_rows(ia, 1, 4);
  CHECK(t.value(padded)(0, 0) == 0.0);
  CHECK(t.value(padded)(1, 0) == 1.0);
}

TEST_CASE("gradient of a composite expression matches finite differences") {
  Mat x0 = arange(3, 4, 0.9);
  Mat w0 = arange(4, 2, 0.8);

  auto build = [](Tape& t, Tape::Id x, Tape::Id w) {
    auto h = t.leaky_relu(t.matmul(x, w), 0.2);
    auto n = t.tanh(h);
    auto centered = t.sub(n, t.broadcast_row(t.mean_rows(n), 3));
    return t.sum_all(t.square(centered));
  };

  Tape t;
  auto ix = t.input(x0);
  auto iw = t.input(w0);
  auto loss = build(t, ix, iw);
  auto grads = t.backward(loss, {ix, iw});

  auto fx = [&](const Mat& x) {
    Tape s;
    return s.value(build(s, s.input(x), s.input(w0)))(0, 0);
  };
  auto fw = [&](const Mat& w) {
    Tape s;
    return s.value(build(s, s.input(x0), s.input(w)))(0, 0);
  };
  CHECK(max_rel_err(t.value(grads[0]), fd_grad(fx, x0)) < 1e-7);
  CHECK(max_rel_err(t.value(grads[1]), fd_grad(fw, w0)) < 1e-7);
}

TEST_CASE("gradients flow through norm, scale and blocks") {
  Mat a0 = arange(4, 3, 1.1);

  auto build = [](Tape& t, Tape::Id a) {
    auto top = t.rows_block(a, 0, 2);
    auto bottom = t.rows_block(a, 2, 2);
    auto prod = t.mul(top, bottom);
    auto nrm = t.frob_norm(prod);               // 1x1
    auto scaled = t.scale(t.add_const(a, 0.3), nrm);
    return t.sum_all(t.square(scaled));
  };

  Tape t;
  auto ia = t.input(a0);
  auto g = t.backward(build(t, ia), {ia})[0];
  auto f = [&](const Mat& a) {
    Tape s;
    return s.value(build(s, s.input(a)))(0, 0);
  };
  CHECK(max_rel_err(t.value(g), fd_grad(f, a0)) < 1e-6);
}

TEST_CASE("vstack and pad_rows route gradients to the right slices") {
  Mat a0 = arange(2, 3, 0.7);
  Mat b0 = arange(3, 3, 1.3);

  auto build = [](Tape& t, Tape::Id a, Tape::Id b) {
    auto st = t.vstack(a, t.pad_rows(b, 0, 3));
    auto sq = t.square(st);
    return t.sum_all(t.mul(sq, sq));
  };
  Tape t;
  auto ia = t.input(a0), ib = t.input(b0);
  auto gs = t.backward(build(t, ia, ib), {ia, ib});
  auto fa = [&](const Mat& a) {
    Tape s;
    return s.value(build(s, s.input(a), s.input(b0)))(0, 0);
  };
  auto fb = [&](const Mat& b) {
    Tape s;
    return s.value(build(s, s.input(a0), s.input(b)))(0, 0);
  };
  CHECK(max_rel_err(t.value(gs[0]), fd_grad(fa, a0)) < 1e-6);
  CHECK(max_rel_err(t.value(gs[1]), fd_grad(fb, b0)) < 1e-6);
}

TEST_CASE("unused inputs get zero gradients of matching shape") {
  Tape t;
  auto used = t.input(Mat::Ones(2, 2));
  auto unused = t.input(Mat::Ones(3, 1));
  auto loss = t.sum_all(t.square(used));
  auto gs = t.backward(loss, {used, unused});
  CHECK(t.value(gs[1]).rows() == 3);
  CHECK(t.value(gs[1]).cols() == 1);
  CHECK(t.value(gs[1]).cwiseAbs().maxCoeff() == 0.0);
  CHECK(t.value(gs[0])(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("second order: backward of a gradient matches FD of the gradient") {
  // f(x) = sum(tanh(x W)^2); g = df/dx; phi = sum(g * C). d phi/dx via
  // backward-of-backward must match finite differences of phi.
  Mat x0 = arange(2, 3, 0.6);
  Mat w0 = arange(3, 2, 0.9);
  Mat c0 = arange(2, 3, 1.0);

  auto phi_val = [&](const Mat& x) {
    Tape s;
    auto ix = s.input(x);
    auto f = s.sum_all(s.square(s.tanh(s.matmul(ix, s.constant(w0)))));
    auto g = s.backward(f, {ix})[0];
    return s.value(s.sum_all(s.mul(g, s.constant(c0))))(0, 0);
  };

  Tape t;
  auto ix = t.input(x0);
  auto f = t.sum_all(t.square(t.tanh(t.matmul(ix, t.constant(w0)))));
  auto g = t.backward(f, {ix})[0];
  auto phi = t.sum_all(t.mul(g, t.constant(c0)));
  auto hvp = t.backward(phi, {ix})[0];

  CHECK(max_rel_err(t.value(hvp), fd_grad(phi_val, x0)) < 1e-6);
}

TEST_CASE("second order through an unrolled descent step") {
  // One gradient-descent step on z, then a loss at the new z; the total
  // derivative with respect to the step size alpha needs second-order terms.
  Mat z0 = arange(3, 2, 0.5);
  Mat w0 = arange(2, 2, 1.2);
  const double alpha0 = 0.05;

  Tape t;
  auto iz = t.input(z0);
  auto ia = t.input(Mat::Constant(1, 1, alpha0));
  auto inner = t.sum_all(t.square(t.matmul(iz, t.constant(w0))));
  auto gz = t.backward(inner, {iz})[0];
  auto z1 = t.sub(iz, t.scale(gz, ia));
  auto outer = t.sum_all(t.square(t.tanh(z1)));
  auto galpha = t.backward(outer, {ia})[0];

  auto eval = [&](double alpha) {
    Tape s;
    auto jz = s.input(z0);
    auto ja = s.input(Mat::Constant(1, 1, alpha));
    auto jinner = s.sum_all(s.square(s.matmul(jz, s.constant(w0))));
    auto jgz = s.backward(jinner, {jz})[0];
    auto jz1 = s.sub(jz, s.scale(jgz, ja));
    return s.value(s.sum_all(s.square(s.tanh(jz1))))(0, 0);
  };
  const double h = 1e-6;
  double fd = (eval(alpha0 + h) - eval(alpha0 - h)) / (2.0 * h);
  CHECK(t.value(galpha)(0, 0) == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("shape mismatches are rejected") {
  Tape t;
  auto a = t.input(Mat::Ones(2, 3));
  auto b = t.input(Mat::Ones(3, 2));
  CHECK_THROWS(t.add(a, b));
  CHECK_THROWS(t.matmul(a, a));
  CHECK_THROWS(t.scale(a, b));  // s must be 1x1
  CHECK_THROWS(t.backward(a, {a}));  // root must be 1x1
}
