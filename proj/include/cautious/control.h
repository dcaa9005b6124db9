#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "cautious/basis.h"
#include "cautious/data.h"
#include "cautious/geometry.h"

namespace cautious {

// ---------------------------------------------------------------------------
// Contraction of z+ = phi(z) (discrete time) or z' = phi(z) (continuous
// time). Both need phi to map R^n to itself, so m == n.

enum class ContractionMode { kDiscrete, kContinuous };

enum class ContractionRoute {
  kAffineJacobian,  // constant Jacobian: one Jacobian check is global
  kGlobalLipschitz,  // the basis Lipschitz constant from metadata
  kJacobianGrid,  // Jacobian checks at grid points only, not a global proof
  kLseMargin,
};

const char* ContractionRouteName(ContractionRoute route);

struct ContractionCertificate {
  bool certified = false;
  ContractionMode mode = ContractionMode::kDiscrete;
  MatrixXd p;
  // Lipschitz constant L (discrete) or one-sided Lipschitz rate gamma
  // (continuous) valid for every member.
  double rate = 0.0;
  ContractionRoute route = ContractionRoute::kGlobalLipschitz;
  // Distance to the certification threshold, positive when certified.
  double margin = 0.0;
};

// Smallest L with ||phi(z) - phi(z*)||_P <= L ||z - z*||_P for all members,
// where ||v||_P = ||P^{1/2} v||. Certified when L < 1. An empty grid
// (n x G) falls back to the global route for bases that are not affine.
ContractionCertificate DtContraction(const ParameterSet& set,
                                     const BasisSet& basis, const MatrixXd& p,
                                     const MatrixXd& grid = MatrixXd());

struct OslVerdict {
  bool holds = false;
  double lhs = 0.0;
  double rhs = 0.0;
};

// Closed-form test of (z - z*)^T P (phi(z) - phi(z*)) <= gamma ||z - z*||_P^2
// for every member. Exact for compact sets.
OslVerdict OslPairTest(const ParameterSet& set, const BasisSet& basis,
                       const VectorXd& z, const VectorXd& z_star, double gamma,
                       const MatrixXd& p = MatrixXd());

enum class OslEstimateMode {
  // a + ||theta^T - a E|| ||J(b)||, E selecting the linear coordinates.
  kShift,
  // lambda_max(sym A) + ||H|| * remainder Jacobian norm, where
  // phi = A z + H r(z) splits along the basis linear part.
  kLinearRemainder,
  // Minimum of the two, with the shift optimized.
  kBest,
};

// Upper estimate of the one-sided Lipschitz constant of z -> theta^T b(z)
// in the P inner product. Needs the basis linear-part metadata; `shift` is
// used by kShift only.
double OslUpperEstimate(const MatrixXd& theta, const BasisSet& basis,
                        OslEstimateMode mode, double shift = 0.0,
                        const MatrixXd& p = MatrixXd());

struct OslMargin {
  double estimate = 0.0;    // upper estimate of osL(phi_lse)
  double correction = 0.0;  // L_w sqrt(lambda_max(N|N22)) cond(P)
  // Every member has osL <= gamma = estimate + correction.
  double gamma = 0.0;
  // Strict contraction is certified when estimate < threshold = -correction.
  double threshold = 0.0;
  bool certified = false;
};

// `weighted_lipschitz` bounds ||b(z) - b(z*)||_{(-N22)^{-1/2}} / ||z - z*||.
OslMargin OslLseMargin(const ParameterSet& set, const BasisSet& basis,
                       const MatrixXd& p, double weighted_lipschitz,
                       OslEstimateMode mode = OslEstimateMode::kBest);
// Derives the weighted constant from the basis Jacobian-norm bound as
// ||J(b)|| / sqrt(-lambda_max(N22)).
OslMargin OslLseMargin(const ParameterSet& set, const BasisSet& basis,
                       const MatrixXd& p = MatrixXd(),
                       OslEstimateMode mode = OslEstimateMode::kBest);

ContractionCertificate CtContraction(const ParameterSet& set,
                                     const BasisSet& basis,
                                     const MatrixXd& p = MatrixXd());

// ---------------------------------------------------------------------------
// Linear systems x+ = A x + B u with (A, B)^T in a SystemSet.

struct StabilityResult {
  std::optional<StabilityCertificate> certificate;
  // lambda_min of the LMI at the best point found; > 0 iff certified.
  double best_min_eigenvalue = 0.0;
};

// Searches P > 0 and beta > 0 with blkdiag(P - beta I, -P, 0) - M >= 0, which
// gives A P A^T < P for every member.
StabilityResult QuadraticStability(const SystemSet& sys);

// Smallest lambda with A P A^T <= lambda P for every member (S-lemma
// certificate, bisection). Values >= 1 mean no contraction.
double CertifiedLyapunovRatio(const SystemSet& sys, const MatrixXd& p);
// The same ratio maximized over sampled members only.
double SampledLyapunovRatio(const SystemSet& sys, const MatrixXd& p, int samples,
                            std::uint64_t seed);

struct EpsilonMinus {
  double value = 0.0;
  VectorXd u;
  double gamma = 0.0;
};

// Smallest radius eps such that one input u puts the fixed point of every
// member within eps of x. Needs a stability certificate on the set.
EpsilonMinus EpsilonMinusAt(const SystemSet& sys, const VectorXd& x);

enum class RegulationRoute { kJointLmi, kMultiStart };

const char* RegulationRouteName(RegulationRoute route);

struct TransientParameters {
  double lyapunov_ratio = 0.0;  // certified lambda with A P A^T <= lambda P
  double sampled_ratio = 0.0;   // the same over sampled members
  double factor = 0.0;          // per-step contraction sqrt(lyapunov_ratio)
  double condition = 0.0;       // lambda_max(P) / lambda_min(P)
};

struct RegulationResult {
  VectorXd x_star;
  VectorXd u_star;
  double delta = 0.0;  // g(x*) = max over members of ||phi(x*)||
  double epsilon_minus = 0.0;
  double bound = 0.0;  // delta + L epsilon_minus, recomputed at x*
  RegulationRoute route = RegulationRoute::kJointLmi;
  TransientParameters transient;
};

struct RegulationOptions {
  int starts = 8;
  std::uint64_t seed = 1;
  int max_iterations = 200;
  int transient_samples = 1000;
};

// Minimizes x -> g(x) + L eps^-(x) over `region`. For affine bases the two
// terms are jointly LMI-representable and the minimum is found by bisection;
// other bases use multi-start projected descent.
RegulationResult SuboptimalRegulation(const ParameterSet& set,
                                      const BasisSet& basis,
                                      const SystemSet& sys, double lipschitz,
                                      const Box& region,
                                      const RegulationOptions& options = {});

// k -> delta + factor^k L cond(P) ||x0 - x*||, for a per-step contraction
// factor in [0, 1).
std::function<double(int)> TransientBound(const MatrixXd& p, double lipschitz,
                                          double delta, const VectorXd& x0,
                                          const VectorXd& x_star, double factor);

}  // namespace cautious
