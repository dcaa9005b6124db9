#pragma once

#include <Eigen/Dense>

namespace cautious {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Relative factor used by every PSD decision: X is treated as PSD when
// lambda_min(X) >= -factor * (1 + ||X||_2). The default is 1e-9.
double RelativeTolerance();
void SetRelativeTolerance(double factor);

double PsdTolerance(const MatrixXd& x);

MatrixXd Symmetrize(const MatrixXd& x);
bool IsSymmetric(const MatrixXd& x);
bool AllFinite(const MatrixXd& x);

double SpectralNorm(const MatrixXd& x);
double MinEigenvalue(const MatrixXd& sym);
double MaxEigenvalue(const MatrixXd& sym);

bool IsPsd(const MatrixXd& sym);
// Strict definiteness uses the same tolerance with the opposite sign, so a
// matrix whose smallest eigenvalue sits inside the tolerance band is not PD.
bool IsPositiveDefinite(const MatrixXd& sym);
bool IsNegativeDefinite(const MatrixXd& sym);

// Moore-Penrose inverse via SVD, dropping singular values below
// 1e-12 * sigma_max.
MatrixXd PseudoInverse(const MatrixXd& x);

// Square root of a PSD matrix (negative eigenvalues inside the tolerance
// band are clipped to zero).
MatrixXd PsdSqrt(const MatrixXd& sym);
// Inverse square root of a positive definite matrix.
MatrixXd PdInverseSqrt(const MatrixXd& sym);

// sigma_min > 1e-8 * sigma_max. An empty matrix has no rows to lose.
bool HasFullRowRank(const MatrixXd& x);

// True when b lies in the column space of a, judged by the projector
// residual ||(I - A A^+) b|| <= 1e-8 * max(||b||, tiny).
bool InRange(const MatrixXd& a, const VectorXd& b);

// Orthonormal basis of the range of a symmetric matrix.
MatrixXd RangeBasis(const MatrixXd& sym);

MatrixXd BlockDiagonal(const MatrixXd& a, const MatrixXd& b);

}  // namespace cautious
