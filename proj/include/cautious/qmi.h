#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cautious/linalg.h"

namespace cautious {

// A symmetric matrix M of size (u + v) split as [[M11, M12], [M21, M22]] with
// M11 of size u x u. The set it describes is
//   Z(M) = { Z in R^{v x u} : [I; Z]^T M [I; Z] >= 0 }.
class PartitionedSymmetric {
 public:
  PartitionedSymmetric() = default;
  PartitionedSymmetric(const MatrixXd& full, int u);

  static PartitionedSymmetric FromBlocks(const MatrixXd& m11,
                                         const MatrixXd& m12,
                                         const MatrixXd& m22);

  int u() const { return u_; }
  int v() const { return static_cast<int>(full_.rows()) - u_; }
  const MatrixXd& full() const { return full_; }

  MatrixXd m11() const { return full_.topLeftCorner(u_, u_); }
  MatrixXd m12() const { return full_.topRightCorner(u_, v()); }
  MatrixXd m21() const { return full_.bottomLeftCorner(v(), u_); }
  MatrixXd m22() const { return full_.bottomRightCorner(v(), v()); }

 private:
  MatrixXd full_;
  int u_ = 0;
};

// M | M22 = M11 - M12 M22^+ M21.
MatrixXd SchurComplement(const PartitionedSymmetric& m);

// Throws NotNegativeDefinite or SchurNotPSD unless Pi22 < 0 and Pi | Pi22 >= 0.
void ValidateNoiseModel(const PartitionedSymmetric& pi);

// blkdiag(Q, -I_T): the noise sequences W (m x T) with W W^T <= Q.
PartitionedSymmetric EnergyNoiseModel(const MatrixXd& q, int samples);

// [I; Z]^T M [I; Z].
MatrixXd QmiValue(const PartitionedSymmetric& m, const MatrixXd& z);

struct MembershipResult {
  bool member = false;
  double min_eigenvalue = 0.0;
  MatrixXd value;
};

MembershipResult QmiMembership(const PartitionedSymmetric& m,
                               const MatrixXd& z);

// When M22 < 0 and M | M22 >= 0 every member can be written as
//   Z = center + left * V * right,  ||V||_2 <= 1,
// with center = -M22^{-1} M21, left = (-M22)^{-1/2}, right = (M|M22)^{1/2}.
struct EllipsoidalForm {
  MatrixXd center;  // v x u
  MatrixXd left;    // v x v
  MatrixXd right;   // u x u

  MatrixXd Map(const MatrixXd& contraction) const {
    return center + left * contraction * right;
  }
};

EllipsoidalForm EllipsoidalParameterization(const PartitionedSymmetric& m);

enum class SampleMode {
  kInterior,  // random direction, radius drawn so the spectral norm is < 1
  kBoundary,  // random direction scaled to unit spectral norm
  kUniform,   // uniform over the set (exact, by rejection)
};

// A draw from the uniform distribution on { V : ||V||_2 <= 1 }. The squared
// singular values are proposed from their marginal Beta law and accepted
// against the Vandermonde factor; the singular frames are Haar. Raises
// SamplingFailure after 10^6 rejected proposals.
MatrixXd UniformSpectralBall(int rows, int cols, std::mt19937_64& rng);

// Draws `count` members of Z(M) through the ellipsoidal form. Requires
// M22 < 0. The interior mode is a radial scheme; kUniform is uniform in V,
// hence in Z whenever `left` and `right` are invertible.
std::vector<MatrixXd> SampleQmiSet(const PartitionedSymmetric& m, int count,
                                   SampleMode mode, std::uint64_t seed);

}  // namespace cautious
