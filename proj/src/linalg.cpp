#include "noma/linalg.hpp"

#include <Eigen/SVD>

#include "noma/errors.hpp"

namespace noma::linalg {

bool all_finite(const CMat& a) { return a.array().isFinite().all(); }
bool all_finite(const RMat& a) { return a.array().isFinite().all(); }

RMat real_embed_matrix(const CMat& h) {
  const Eigen::Index m = h.rows(), k = h.cols();
  RMat e(2 * m, 2 * k);
  e.topLeftCorner(m, k) = h.real();
  e.topRightCorner(m, k) = -h.imag();
  e.bottomLeftCorner(m, k) = h.imag();
  e.bottomRightCorner(m, k) = h.real();
  return e;
}

RMat real_embed_stack(const CMat& x) {
  RMat s(2 * x.rows(), x.cols());
  s.topRows(x.rows()) = x.real();
  s.bottomRows(x.rows()) = x.imag();
  return s;
}

CMat complex_from_stack(const RMat& xr) {
  if (xr.rows() % 2 != 0) {
    throw ShapeMismatchError("complex_from_stack: odd row count");
  }
  const Eigen::Index k = xr.rows() / 2;
  CMat x(k, xr.cols());
  x.real() = xr.topRows(k);
  x.imag() = xr.bottomRows(k);
  return x;
}

CMat least_squares(const CMat& a, const CMat& b, double rank_tol) {
  if (a.rows() != b.rows()) {
    throw ShapeMismatchError("least_squares: A and B row counts differ");
  }
  if (a.rows() < a.cols()) {
    throw RankDeficientError("least_squares: fewer rows than columns");
  }
  Eigen::JacobiSVD<CMat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0 || sv(sv.size() - 1) < rank_tol * sv(0)) {
    throw RankDeficientError("least_squares: singular value ratio below tolerance");
  }
  return svd.solve(b);
}

double frobenius_norm_sq(const CMat& a) { return a.squaredNorm(); }
double frobenius_norm_sq(const RMat& a) { return a.squaredNorm(); }

CMat matmul(const CMat& a, const CMat& b) {
  if (a.cols() != b.rows()) {
    throw ShapeMismatchError("matmul: inner dimensions differ");
  }
  return a * b;
}

CMat hermitian(const CMat& a) { return a.adjoint(); }

}  // namespace noma::linalg
