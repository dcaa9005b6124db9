#pragma once

#include <optional>
#include <vector>

#include "cautious/basis.h"
#include "cautious/data.h"
#include "cautious/geometry.h"

namespace cautious {

enum class NonnegBranch {
  kNone,
  kZeroUncertainty,      // c^T (N|N22) c = 0 and theta_lse c >= 0
  kPositiveUncertainty,  // c^T (N|N22) c > 0 and the per-index inequality
};

struct NonnegResult {
  bool holds = false;
  NonnegBranch branch = NonnegBranch::kNone;
  // For every checked index i, min over the set of (theta c)_i.
  VectorXd minimum;
  std::vector<int> indices;
};

// Whether (theta c)_i >= 0 for every member theta and every i in `indices`
// (all components when empty). Needs a compact set; unbounded sets always
// contain members with negative entries unless the entry is pinned, and the
// verdict is then false.
NonnegResult NonnegParams(const ParameterSet& set, const VectorXd& c,
                          const std::vector<int>& indices = {});

enum class ConvexityRoute {
  kNone,
  kTrueFunction,  // c^T phi_theta is convex for every member
  kAffineBasis,   // affine basis: g_c is an affine term plus a norm of an affine map
  kUncertainty,   // convex estimate plus a monotone uncertainty, premise sampled
};

const char* ConvexityRouteName(ConvexityRoute route);

struct ConvexityReport {
  VectorXd c;
  // Nonnegativity of the coefficients of the non-affine components.
  NonnegResult nonneg;
  bool functions_convex = false;
  bool strictly_convex = false;
  // 0 is an element of Z(N_c), tested as c^T N11 c >= 0.
  bool zero_in_nc = false;
  bool gc_convex = false;
  ConvexityRoute route = ConvexityRoute::kNone;
  // The uncertainty route checks -N22^{-1} b(z) >= 0 only at the supplied
  // points; a convexity claim through it is not a proof.
  bool sampled_premise = false;
};

// `premise_points` (n x P) are used only by the uncertainty route.
ConvexityReport ConvexityCertificate(const ParameterSet& set,
                                     const BasisSet& basis, const VectorXd& c,
                                     const MatrixXd& premise_points = MatrixXd());

// Gradient of z -> g_c(z) from the closed form. Needs a compact set, an
// analytic basis Jacobian and b(z) != 0.
VectorXd GradGc(const ParameterSet& set, const BasisSet& basis,
                const VectorXd& z, const VectorXd& c);

struct GcMinimum {
  VectorXd z;
  double value = 0.0;  // g_c(z), a certified upper bound at the returned point
  bool converged = false;
  int iterations = 0;
  // False when convexity was not certified, so the point may be local.
  bool global = false;
};

struct MinimizeOptions {
  DescentOptions descent;
  std::optional<VectorXd> start;
};

GcMinimum MinimizeGc(const ParameterSet& set, const BasisSet& basis,
                     const VectorXd& c, const ConvexDomain& domain,
                     const MinimizeOptions& options = {});

struct LipschitzCheck {
  bool holds = false;
  bool converged = false;
  double multiplier = 0.0;
  double min_eigenvalue = 0.0;
};

// ||theta^T (b(z) - b(z*))||_P <= L ||z - z*||_Q for every member, through
// the S-lemma. Empty P or Q means the identity.
LipschitzCheck LipschitzPairCheck(const ParameterSet& set, const BasisSet& basis,
                                  const VectorXd& z, const VectorXd& z_star,
                                  double lipschitz, const MatrixXd& p = MatrixXd(),
                                  const MatrixXd& q = MatrixXd());

// ||P^{1/2} theta^T J(b)(z) Q^{-1/2}||_2 <= L for every member.
LipschitzCheck LipschitzJacobianCheck(const ParameterSet& set,
                                      const BasisSet& basis, const VectorXd& z,
                                      double lipschitz,
                                      const MatrixXd& p = MatrixXd(),
                                      const MatrixXd& q = MatrixXd());

// blkdiag(L^2 P^{-1}, -L_b^2 I) - alpha N >= 0: one check valid for every
// pair of points when L_b is a Lipschitz constant of b.
LipschitzCheck LipschitzGlobalCheck(const ParameterSet& set, double lipschitz,
                                    double basis_lipschitz,
                                    const MatrixXd& p = MatrixXd());
// Reads L_b from the basis metadata (MissingLb when absent).
LipschitzCheck LipschitzGlobalCheck(const ParameterSet& set,
                                    const BasisSet& basis, double lipschitz,
                                    const MatrixXd& p = MatrixXd());

struct LipschitzConstant {
  double value = 0.0;
  double multiplier = 0.0;
};

// Smallest L accepted by the Jacobian check at z (bisection, never below the
// true minimum).
LipschitzConstant MinimalJacobianLipschitz(const ParameterSet& set,
                                           const BasisSet& basis,
                                           const VectorXd& z,
                                           const MatrixXd& p = MatrixXd(),
                                           const MatrixXd& q = MatrixXd());

// Smallest L accepted by the global check.
LipschitzConstant MinimalGlobalLipschitz(const ParameterSet& set,
                                         double basis_lipschitz,
                                         const MatrixXd& p = MatrixXd());

}  // namespace cautious
