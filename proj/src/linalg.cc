#include "cautious/linalg.h"

#include <atomic>
#include <cmath>
#include <limits>
#include <vector>

#include "cautious/error.h"

namespace cautious {
namespace {

std::atomic<double> g_relative_tolerance{1e-9};

constexpr double kPinvCutoff = 1e-12;
constexpr double kRankCutoff = 1e-8;
constexpr double kRangeCutoff = 1e-8;

}  // namespace

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNotSymmetric: return "NotSymmetric";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kNotNegativeDefinite: return "NotNegativeDefinite";
    case ErrorCode::kNotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::kSchurNotPsd: return "SchurNotPSD";
    case ErrorCode::kNotCompact: return "NotCompact";
    case ErrorCode::kHypothesisViolated: return "HypothesisViolated";
    case ErrorCode::kNonConvergence: return "NonConvergence";
    case ErrorCode::kZeroDirection: return "ZeroDirection";
    case ErrorCode::kZeroBasisVector: return "ZeroBasisVector";
    case ErrorCode::kMissingMetadata: return "MissingMetadata";
    case ErrorCode::kMissingJacobian: return "MissingJacobian";
    case ErrorCode::kMissingDecomposition: return "MissingDecomposition";
    case ErrorCode::kMissingLb: return "MissingLb";
    case ErrorCode::kEmptySet: return "EmptySet";
    case ErrorCode::kEmptyGrid: return "EmptyGrid";
    case ErrorCode::kEmptyVertexSet: return "EmptyVertexSet";
    case ErrorCode::kCoincidentPoints: return "CoincidentPoints";
    case ErrorCode::kOutsideDomain: return "OutsideDomain";
    case ErrorCode::kStabilityNotCertified: return "StabilityNotCertified";
    case ErrorCode::kLambdaOutOfRange: return "LambdaOutOfRange";
    case ErrorCode::kExcitationFloorViolated: return "ExcitationFloorViolated";
    case ErrorCode::kSamplingFailure: return "SamplingFailure";
    case ErrorCode::kInvalidPattern: return "InvalidPattern";
    case ErrorCode::kNotInRange: return "NotInRange";
    case ErrorCode::kNegativeLambda: return "NegativeLambda";
    case ErrorCode::kNonPositiveEpsilon: return "NonPositiveEpsilon";
    case ErrorCode::kOracleFailure: return "OracleFailure";
    case ErrorCode::kUnboundedNoiseSet: return "UnboundedNoiseSet";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kConfig: return "ConfigError";
  }
  return "Unknown";
}

double RelativeTolerance() { return g_relative_tolerance.load(); }

void SetRelativeTolerance(double factor) {
  Require(std::isfinite(factor) && factor > 0.0, ErrorCode::kInvalidArgument,
          "tolerance factor must be positive");
  g_relative_tolerance.store(factor);
}

double PsdTolerance(const MatrixXd& x) {
  return RelativeTolerance() * (1.0 + SpectralNorm(x));
}

MatrixXd Symmetrize(const MatrixXd& x) {
  return 0.5 * (x + x.transpose());
}

bool IsSymmetric(const MatrixXd& x) {
  if (x.rows() != x.cols()) return false;
  const double scale = 1.0 + x.cwiseAbs().maxCoeff();
  return (x - x.transpose()).cwiseAbs().maxCoeff() <=
         RelativeTolerance() * scale;
}

bool AllFinite(const MatrixXd& x) { return x.allFinite(); }

double SpectralNorm(const MatrixXd& x) {
  if (x.size() == 0) return 0.0;
  if (x.rows() == x.cols() && x.isApprox(x.transpose(), 0.0)) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(x, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  Eigen::JacobiSVD<MatrixXd> svd(x);
  return svd.singularValues()(0);
}

double MinEigenvalue(const MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Symmetrize(sym),
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double MaxEigenvalue(const MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Symmetrize(sym),
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues()(sym.rows() - 1);
}

bool IsPsd(const MatrixXd& sym) {
  if (sym.size() == 0) return true;
  return MinEigenvalue(sym) >= -PsdTolerance(sym);
}

bool IsPositiveDefinite(const MatrixXd& sym) {
  if (sym.size() == 0) return true;
  return MinEigenvalue(sym) > PsdTolerance(sym);
}

bool IsNegativeDefinite(const MatrixXd& sym) {
  if (sym.size() == 0) return true;
  return MaxEigenvalue(sym) < -PsdTolerance(sym);
}

MatrixXd PseudoInverse(const MatrixXd& x) {
  if (x.size() == 0) return MatrixXd::Zero(x.cols(), x.rows());
  Eigen::JacobiSVD<MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& s = svd.singularValues();
  const double cutoff = kPinvCutoff * s(0);
  VectorXd inv = VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) inv(i) = 1.0 / s(i);
  }
  MatrixXd result = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  if (x.rows() == x.cols() && IsSymmetric(x)) return Symmetrize(result);
  return result;
}

MatrixXd PsdSqrt(const MatrixXd& sym) {
  if (sym.size() == 0) return sym;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Symmetrize(sym));
  VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return Symmetrize(es.eigenvectors() * ev.asDiagonal() *
                    es.eigenvectors().transpose());
}

MatrixXd PdInverseSqrt(const MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Symmetrize(sym));
  Require(es.eigenvalues()(0) > 0.0, ErrorCode::kNotPositiveDefinite,
          "inverse square root of a matrix that is not positive definite");
  VectorXd ev = es.eigenvalues().cwiseSqrt().cwiseInverse();
  return Symmetrize(es.eigenvectors() * ev.asDiagonal() *
                    es.eigenvectors().transpose());
}

bool HasFullRowRank(const MatrixXd& x) {
  if (x.rows() == 0) return true;
  if (x.cols() < x.rows()) return false;
  Eigen::JacobiSVD<MatrixXd> svd(x);
  const VectorXd& s = svd.singularValues();
  return s(0) > 0.0 && s(s.size() - 1) > kRankCutoff * s(0);
}

bool InRange(const MatrixXd& a, const VectorXd& b) {
  const double bn = b.norm();
  if (bn == 0.0) return true;
  const VectorXd residual = b - a * (PseudoInverse(a) * b);
  return residual.norm() <= kRangeCutoff * bn;
}

MatrixXd RangeBasis(const MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Symmetrize(sym));
  const VectorXd& ev = es.eigenvalues();
  const double scale = ev.cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev(i)) > kPinvCutoff * scale && scale > 0.0) keep.push_back(i);
  }
  MatrixXd basis(sym.rows(), static_cast<Eigen::Index>(keep.size()));
  for (size_t j = 0; j < keep.size(); ++j) {
    basis.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(keep[j]);
  }
  return basis;
}

MatrixXd BlockDiagonal(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out = MatrixXd::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

}  // namespace cautious
