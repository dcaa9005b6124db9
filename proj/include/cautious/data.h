#pragma once

#include <optional>
#include <vector>

#include "cautious/basis.h"
#include "cautious/qmi.h"

namespace cautious {

// Noisy samples y_i = theta^T b(z_i) + w_i gathered column-wise.
struct Dataset {
  MatrixXd points;  // n x T
  MatrixXd values;  // m x T
};

// The set Theta = Z(N) of parameters theta (k x m) consistent with data.
// N is split (m, k), and theta is a member iff
//   [I; theta]^T N [I; theta] >= 0.
class ParameterSet {
 public:
  explicit ParameterSet(const PartitionedSymmetric& n,
                        std::optional<MatrixXd> regressors = std::nullopt);

  // N = [[I, Y], [0, -Phi]] Pi [[I, Y], [0, -Phi]]^T.
  static ParameterSet FromData(const MatrixXd& y, const MatrixXd& phi,
                               const PartitionedSymmetric& pi);
  static ParameterSet FromDataset(const Dataset& data, const BasisSet& basis,
                                  const PartitionedSymmetric& pi);

  int m() const { return n_.u(); }
  int k() const { return n_.v(); }
  const PartitionedSymmetric& n() const { return n_; }
  const std::optional<MatrixXd>& regressors() const { return phi_; }

  // N22 < 0, equivalently a full row rank regressor matrix.
  bool compact() const { return compact_; }
  // N | N22, always PSD for sets built from valid noise models.
  const MatrixXd& schur() const { return schur_; }
  // (-N22)^+, PSD.
  const MatrixXd& neg_n22_pinv() const { return neg_n22_pinv_; }
  // -N22^+ N21, the least squares estimate. Throws NotCompact when the set
  // is unbounded, because the estimate is then not unique.
  const MatrixXd& lse() const;
  // -N22^+ N21 without the compactness check; for unbounded sets it is the
  // minimum-norm least squares estimate.
  const MatrixXd& center() const { return center_; }
  // theta = center + left V right with ||V||_2 <= 1. Throws NotCompact for
  // unbounded sets.
  EllipsoidalForm ellipsoid() const;
  bool Contains(const MatrixXd& theta) const;

 private:
  struct Factors {
    MatrixXd schur, neg_n22_pinv, center, left;
  };
  ParameterSet(const PartitionedSymmetric& n, MatrixXd regressors, Factors factors);

  PartitionedSymmetric n_;
  std::optional<MatrixXd> phi_;
  bool compact_ = false;
  MatrixXd schur_;
  MatrixXd neg_n22_pinv_;
  MatrixXd center_;
  MatrixXd left_;  // (-N22)^{-1/2}, compact sets only
};

// Outer approximation Z(sum_i N_i) of the intersection of the member sets.
ParameterSet CombineDatasets(const std::vector<ParameterSet>& sets);

// A quadratic stability certificate: A Pbar A^T < Pbar for every admissible
// pair, with blkdiag(Pbar - beta I, -Pbar, 0) - M >= 0.
struct StabilityCertificate {
  MatrixXd p;
  double beta = 0.0;
};

// The set Sigma of (A, B) with x+ = A x + B u + w consistent with one
// trajectory. It is a ParameterSet with m = n and k = n + r whose members
// are [A^T; B^T].
class SystemSet {
 public:
  SystemSet(ParameterSet params, int n, int r);

  static SystemSet FromTrajectory(const MatrixXd& states, const MatrixXd& inputs,
                                  const PartitionedSymmetric& pi);

  int n() const { return n_; }
  int r() const { return r_; }
  const ParameterSet& params() const { return params_; }

  MatrixXd A(const MatrixXd& member) const;
  MatrixXd B(const MatrixXd& member) const;
  static MatrixXd Member(const MatrixXd& a, const MatrixXd& b);

  const std::optional<StabilityCertificate>& stability() const {
    return stability_;
  }
  SystemSet WithStability(StabilityCertificate cert) const;

 private:
  ParameterSet params_;
  int n_;
  int r_;
  std::optional<StabilityCertificate> stability_;
};

}  // namespace cautious
