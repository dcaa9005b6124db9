#include "cautious/data.h"

#include "cautious/error.h"

namespace cautious {

ParameterSet::ParameterSet(const PartitionedSymmetric& n,
                           std::optional<MatrixXd> regressors)
    : n_(n), phi_(std::move(regressors)) {
  const MatrixXd n22 = n_.m22();
  if (phi_) {
    Require(phi_->rows() == k(), ErrorCode::kDimensionMismatch,
            "regressor matrix does not match the parameter dimension");
    compact_ = HasFullRowRank(*phi_) && IsNegativeDefinite(n22);
  } else {
    compact_ = IsNegativeDefinite(n22);
  }
  neg_n22_pinv_ = PseudoInverse(-n22);
  const MatrixXd n12 = n_.m12();
  schur_ = Symmetrize(n_.m11() + n12 * neg_n22_pinv_ * n12.transpose());
  center_ = neg_n22_pinv_ * n_.m21();
  if (compact_) left_ = PdInverseSqrt(-n22);
}

ParameterSet::ParameterSet(const PartitionedSymmetric& n, MatrixXd regressors,
                           Factors factors)
    : n_(n),
      phi_(std::move(regressors)),
      compact_(true),
      schur_(std::move(factors.schur)),
      neg_n22_pinv_(std::move(factors.neg_n22_pinv)),
      center_(std::move(factors.center)),
      left_(std::move(factors.left)) {}

namespace {

// With R = (-Pi22)^{1/2} and the noise center Z_c = -Pi22^{-1} Pi21, theta is
// a member iff E(theta)^T E(theta) <= Pi | Pi22 where
//   E(theta) = R (Y^T - Z_c) - R Phi^T theta.
// A QR factorization of R Phi^T = Q [U; 0] then gives the center, the Schur
// complement and the shape of the set without forming N, whose entries can be
// many orders of magnitude larger than N | N22.
struct WhitenedFactors {
  bool ok = false;
  MatrixXd schur, neg_n22_pinv, center, left;
};

WhitenedFactors FactorData(const MatrixXd& y, const MatrixXd& phi,
                           const PartitionedSymmetric& pi) {
  WhitenedFactors out;
  const auto k = phi.rows();
  const auto t = phi.cols();
  if (k > t) return out;
  const MatrixXd neg22 = -pi.m22();
  const MatrixXd r = PsdSqrt(neg22);
  const MatrixXd z_c = neg22.ldlt().solve(pi.m21());  // T x m
  const MatrixXd yt = r * (y.transpose() - z_c);
  const MatrixXd at = r * phi.transpose();
  Eigen::HouseholderQR<MatrixXd> qr(at);
  const MatrixXd u = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<MatrixXd> svd(u, Eigen::ComputeFullV);
  const VectorXd sv = svd.singularValues();
  if (sv.size() == 0 || sv.minCoeff() <= sv.maxCoeff() * 1e-13) return out;
  const MatrixXd qty = qr.householderQ().transpose() * yt;
  const MatrixXd& v = svd.matrixV();
  const MatrixXd residual = qty.bottomRows(t - k);
  out.schur = Symmetrize(SchurComplement(pi) - residual.transpose() * residual);
  // U theta_c = (Q^T Ytilde)_top.
  out.center = u.triangularView<Eigen::Upper>().solve(qty.topRows(k));
  out.left = v * sv.cwiseInverse().asDiagonal() * v.transpose();
  out.neg_n22_pinv = v * sv.cwiseAbs2().cwiseInverse().asDiagonal() * v.transpose();
  out.ok = true;
  return out;
}

}  // namespace

ParameterSet ParameterSet::FromData(const MatrixXd& y, const MatrixXd& phi,
                                    const PartitionedSymmetric& pi) {
  const auto m = y.rows();
  const auto t = y.cols();
  Require(phi.cols() == t, ErrorCode::kDimensionMismatch,
          "values and regressors must have the same number of samples");
  Require(pi.u() == m && pi.v() == t, ErrorCode::kDimensionMismatch,
          "noise model must be split (m, T)");
  Require(y.allFinite() && phi.allFinite(), ErrorCode::kNonFinite,
          "data contains non-finite entries");
  ValidateNoiseModel(pi);
  const auto k = phi.rows();
  MatrixXd gate = MatrixXd::Zero(m + k, m + t);
  gate.topLeftCorner(m, m) = MatrixXd::Identity(m, m);
  gate.topRightCorner(m, t) = y;
  gate.bottomRightCorner(k, t) = -phi;
  const MatrixXd n = Symmetrize(gate * pi.full() * gate.transpose());
  const PartitionedSymmetric split(n, static_cast<int>(m));
  WhitenedFactors f = FactorData(y, phi, pi);
  if (!f.ok || !HasFullRowRank(phi) || !IsNegativeDefinite(split.m22())) {
    return ParameterSet(split, phi);
  }
  return ParameterSet(split, phi,
                      Factors{std::move(f.schur), std::move(f.neg_n22_pinv),
                              std::move(f.center), std::move(f.left)});
}

ParameterSet ParameterSet::FromDataset(const Dataset& data, const BasisSet& basis,
                                       const PartitionedSymmetric& pi) {
  return FromData(data.values, basis.EvaluateColumns(data.points), pi);
}

const MatrixXd& ParameterSet::lse() const {
  Require(compact_, ErrorCode::kNotCompact,
          "least squares estimate is not unique for an unbounded set");
  return center_;
}

EllipsoidalForm ParameterSet::ellipsoid() const {
  Require(compact_, ErrorCode::kNotCompact,
          "only compact sets have an ellipsoidal form");
  return {center_, left_, PsdSqrt(schur_)};
}

bool ParameterSet::Contains(const MatrixXd& theta) const {
  return QmiMembership(n_, theta).member;
}

ParameterSet CombineDatasets(const std::vector<ParameterSet>& sets) {
  Require(!sets.empty(), ErrorCode::kEmptySet, "nothing to combine");
  MatrixXd sum = sets.front().n().full();
  bool all_phi = sets.front().regressors().has_value();
  for (size_t i = 1; i < sets.size(); ++i) {
    Require(sets[i].m() == sets.front().m() && sets[i].k() == sets.front().k(),
            ErrorCode::kDimensionMismatch, "combined sets must share (m, k)");
    sum += sets[i].n().full();
    all_phi = all_phi && sets[i].regressors().has_value();
  }
  std::optional<MatrixXd> phi;
  if (all_phi) {
    Eigen::Index cols = 0;
    for (const auto& s : sets) cols += s.regressors()->cols();
    MatrixXd stacked(sets.front().k(), cols);
    Eigen::Index at = 0;
    for (const auto& s : sets) {
      stacked.middleCols(at, s.regressors()->cols()) = *s.regressors();
      at += s.regressors()->cols();
    }
    phi = stacked;
  }
  return ParameterSet(PartitionedSymmetric(sum, sets.front().m()), phi);
}

SystemSet::SystemSet(ParameterSet params, int n, int r)
    : params_(std::move(params)), n_(n), r_(r) {
  Require(n_ >= 1 && r_ >= 1 && params_.m() == n_ && params_.k() == n_ + r_,
          ErrorCode::kDimensionMismatch,
          "system set must be split (n, n + r)");
}

SystemSet SystemSet::FromTrajectory(const MatrixXd& states,
                                    const MatrixXd& inputs,
                                    const PartitionedSymmetric& pi) {
  const auto n = states.rows();
  const auto t = inputs.cols();
  Require(states.cols() == t + 1, ErrorCode::kDimensionMismatch,
          "a trajectory with T inputs needs T + 1 states");
  const MatrixXd x_plus = states.rightCols(t);
  MatrixXd regress(n + inputs.rows(), t);
  regress << states.leftCols(t), inputs;
  return SystemSet(ParameterSet::FromData(x_plus, regress, pi),
                   static_cast<int>(n), static_cast<int>(inputs.rows()));
}

MatrixXd SystemSet::A(const MatrixXd& member) const {
  return member.topRows(n_).transpose();
}

MatrixXd SystemSet::B(const MatrixXd& member) const {
  return member.bottomRows(r_).transpose();
}

MatrixXd SystemSet::Member(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd member(a.cols() + b.cols(), a.rows());
  member << a.transpose(), b.transpose();
  return member;
}

SystemSet SystemSet::WithStability(StabilityCertificate cert) const {
  SystemSet copy = *this;
  copy.stability_ = std::move(cert);
  return copy;
}

}  // namespace cautious
