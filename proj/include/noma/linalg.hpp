#pragma once

#include <Eigen/Dense>
#include <complex>

namespace noma::linalg {

using CMat = Eigen::MatrixXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

/// Relative rank tolerance for least_squares: the system is rejected as rank
/// deficient when sigma_min < kRankTol * sigma_max.
inline constexpr double kRankTol = 1e-10;

bool all_finite(const CMat& a);
bool all_finite(const RMat& a);

/// Real-equivalent embedding of a complex matrix:
///   [[Re H, -Im H],
///    [Im H,  Re H]]   (2M x 2K)
/// so that real_embed_matrix(H) * real_embed_stack(X) == real_embed_stack(H*X).
RMat real_embed_matrix(const CMat& h);

/// Stacked real representation [Re X; Im X] (2K x J).
RMat real_embed_stack(const CMat& x);

/// Inverse of real_embed_stack.
CMat complex_from_stack(const RMat& xr);

/// argmin_W ||A W - B||_F via SVD (orthogonal factorization; never normal
/// equations). Throws RankDeficientError when sigma_min < rank_tol*sigma_max.
CMat least_squares(const CMat& a, const CMat& b, double rank_tol = kRankTol);

double frobenius_norm_sq(const CMat& a);
double frobenius_norm_sq(const RMat& a);

/// Shape-checked product. Throws ShapeMismatchError.
CMat matmul(const CMat& a, const CMat& b);

/// Conjugate transpose.
CMat hermitian(const CMat& a);

}  // namespace noma::linalg
