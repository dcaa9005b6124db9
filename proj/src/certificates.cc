#include "cautious/certificates.h"

#include <cmath>
#include <limits>

#include "cautious/bounds.h"
#include "cautious/error.h"
#include "cautious/lmi.h"

namespace cautious {
namespace {

constexpr double kMultiplierUpper = 1e8;

MatrixXd WeightOrIdentity(const MatrixXd& w, int size, const char* what) {
  if (w.size() == 0) return MatrixXd::Identity(size, size);
  Require(w.rows() == size && w.cols() == size, ErrorCode::kDimensionMismatch,
          std::string(what) + " weight has the wrong size");
  Require(IsSymmetric(w), ErrorCode::kNotSymmetric,
          std::string(what) + " weight is not symmetric");
  Require(IsPositiveDefinite(w), ErrorCode::kNotPositiveDefinite,
          std::string(what) + " weight must be positive definite");
  return Symmetrize(w);
}

// F(alpha) = [[s P^{-1}, 0, 0], [0, 0, D], [0, D^T, I]] - alpha blkdiag(N, 0).
// By a Schur complement on the identity block and the S-lemma, feasibility
// means s P^{-1} - theta^T D D^T theta >= 0 for every member, that is
// ||P^{1/2} theta^T D||_2^2 <= s.
AffineLmi BorderedNormLmi(const ParameterSet& set, const MatrixXd& d,
                          const MatrixXd& p_inv, double s) {
  const int m = set.m();
  const int k = set.k();
  const auto q = d.cols();
  const auto size = m + k + q;
  AffineLmi lmi;
  lmi.constant = MatrixXd::Zero(size, size);
  lmi.constant.topLeftCorner(m, m) = s * p_inv;
  lmi.constant.block(m, m + k, k, q) = d;
  lmi.constant.block(m + k, m, q, k) = d.transpose();
  lmi.constant.bottomRightCorner(q, q) = MatrixXd::Identity(q, q);
  MatrixXd term = MatrixXd::Zero(size, size);
  term.topLeftCorner(m + k, m + k) = -set.n().full();
  lmi.terms = {term};
  lmi.lower = VectorXd::Zero(1);
  lmi.upper = VectorXd::Constant(1, kMultiplierUpper);
  return lmi;
}

LipschitzCheck FromResult(const LmiResult& r) {
  LipschitzCheck out;
  out.holds = r.feasible;
  out.converged = r.converged;
  out.min_eigenvalue = r.min_eigenvalue;
  out.multiplier = r.witness.size() > 0 ? r.witness(0) : 0.0;
  return out;
}

// sup over members of ||P^{1/2} theta^T D||_2 for a compact set, using the
// ellipsoidal form theta = center + K^{1/2} V S^{1/2}.
double CompactNormUpper(const ParameterSet& set, const MatrixXd& d,
                        const MatrixXd& p_sqrt) {
  const EllipsoidalForm form = set.ellipsoid();
  return SpectralNorm(p_sqrt * form.center.transpose() * d) +
         SpectralNorm(p_sqrt * form.right) * SpectralNorm(form.left * d);
}

// Smallest L with a strictly feasible bordered LMI at s = L^2.
LipschitzConstant MinimalBorderedNorm(const ParameterSet& set,
                                      const MatrixXd& d, const MatrixXd& p) {
  const MatrixXd p_inv = p.inverse();
  const MatrixXd p_sqrt = PsdSqrt(p);
  LipschitzConstant out;
  const double lower = SpectralNorm(p_sqrt * set.center().transpose() * d);
  AffineLmi lmi = BorderedNormLmi(set, d, p_inv, 0.0);
  VectorXd last;
  auto feasible = [&](double l) {
    lmi.constant.topLeftCorner(set.m(), set.m()) = l * l * p_inv;
    LmiOptions opts;
    opts.warm_start = last;
    opts.strict = true;
    const LmiResult r = SolveAffineLmi(lmi, opts);
    if (r.feasible) {
      last = r.witness;
      out.multiplier = r.witness(0);
    }
    return r.feasible;
  };
  double upper;
  if (set.compact()) {
    upper = CompactNormUpper(set, d, p_sqrt);
    // The analytic upper end is valid; run it once to obtain a multiplier.
    feasible(upper * (1.0 + 1e-9) + 1e-12);
  } else {
    upper = lower + 1.0;
    int tries = 0;
    while (!feasible(upper) && ++tries < 80) upper = lower + 2.0 * (upper - lower);
    if (tries >= 80) {
      out.value = std::numeric_limits<double>::infinity();
      return out;
    }
  }
  if (!(upper > lower)) {
    out.value = upper;
    return out;
  }
  out.value = BisectSmallestFeasible(lower, upper, feasible, 60);
  return out;
}

}  // namespace

NonnegResult NonnegParams(const ParameterSet& set, const VectorXd& c,
                          const std::vector<int>& indices) {
  Require(c.size() == set.m(), ErrorCode::kDimensionMismatch,
          "direction has the wrong size");
  Require(c.squaredNorm() > 0.0, ErrorCode::kZeroDirection,
          "direction must be nonzero");
  NonnegResult out;
  if (indices.empty()) {
    for (int i = 0; i < set.k(); ++i) out.indices.push_back(i);
  } else {
    out.indices = indices;
  }
  for (const int i : out.indices) {
    Require(i >= 0 && i < set.k(), ErrorCode::kDimensionMismatch,
            "component index out of range");
  }
  out.minimum = VectorXd::Constant(static_cast<Eigen::Index>(out.indices.size()),
                                   -std::numeric_limits<double>::infinity());
  if (!set.compact()) return out;

  const VectorXd lin = set.lse() * c;
  const double sc = std::max(0.0, c.dot(set.schur() * c));
  const double tol = RelativeTolerance();
  const bool zero_uncertainty =
      sc <= tol * (1.0 + SpectralNorm(set.schur())) * c.squaredNorm();
  const MatrixXd& k = set.neg_n22_pinv();
  bool holds = true;
  for (size_t j = 0; j < out.indices.size(); ++j) {
    const int i = out.indices[j];
    const double spread = zero_uncertainty ? 0.0 : std::sqrt(sc * k(i, i));
    out.minimum(static_cast<Eigen::Index>(j)) = lin(i) - spread;
    if (lin(i) - spread < -tol * (1.0 + lin.cwiseAbs().maxCoeff())) holds = false;
  }
  out.holds = holds;
  if (holds) {
    out.branch = zero_uncertainty ? NonnegBranch::kZeroUncertainty
                                  : NonnegBranch::kPositiveUncertainty;
  }
  return out;
}

const char* ConvexityRouteName(ConvexityRoute route) {
  switch (route) {
    case ConvexityRoute::kNone: return "none";
    case ConvexityRoute::kTrueFunction: return "true_function";
    case ConvexityRoute::kAffineBasis: return "affine_basis";
    case ConvexityRoute::kUncertainty: return "uncertainty";
  }
  return "unknown";
}

ConvexityReport ConvexityCertificate(const ParameterSet& set,
                                     const BasisSet& basis, const VectorXd& c,
                                     const MatrixXd& premise_points) {
  const auto& curvature = basis.metadata().curvature;
  Require(!curvature.empty(), ErrorCode::kMissingMetadata,
          "basis declares no curvature flags");
  Require(basis.size() == set.k(), ErrorCode::kDimensionMismatch,
          "basis size does not match the set");
  ConvexityReport report;
  report.c = c;
  report.zero_in_nc = c.dot(set.n().m11() * c) >= 0.0;

  std::vector<int> curved;
  bool any_unknown = false;
  for (int i = 0; i < set.k(); ++i) {
    const Curvature ci = curvature[static_cast<size_t>(i)];
    if (ci == Curvature::kAffine) continue;
    curved.push_back(i);
    if (ci == Curvature::kUnknown) any_unknown = true;
  }

  if (curved.empty()) {
    // Every c^T phi_theta is affine.
    Require(c.squaredNorm() > 0.0, ErrorCode::kZeroDirection,
            "direction must be nonzero");
    report.nonneg.holds = true;
    report.functions_convex = true;
  } else {
    report.nonneg = NonnegParams(set, c, curved);
    report.functions_convex = report.nonneg.holds && !any_unknown;
    if (report.functions_convex) {
      // One strictly convex component with a coefficient bounded away from
      // zero over the whole set makes every member's function strictly convex.
      const double floor = RelativeTolerance();
      for (size_t j = 0; j < curved.size(); ++j) {
        if (curvature[static_cast<size_t>(curved[j])] == Curvature::kStrictlyConvex &&
            report.nonneg.minimum(static_cast<Eigen::Index>(j)) > floor) {
          report.strictly_convex = true;
        }
      }
    }
  }

  if (report.functions_convex) {
    report.gc_convex = true;
    report.route = ConvexityRoute::kTrueFunction;
    return report;
  }
  if (!set.compact()) return report;
  if (basis.metadata().all_affine()) {
    report.gc_convex = true;
    report.route = ConvexityRoute::kAffineBasis;
    return report;
  }
  if (any_unknown || premise_points.cols() == 0) return report;

  // Convex estimate: theta_lse c >= 0 on the curved components.
  const VectorXd lin = set.lse() * c;
  for (const int i : curved) {
    if (lin(i) < 0.0) return report;
  }
  // Monotone uncertainty: (-N22^{-1} b(z))_i >= 0 on the curved components
  // at every premise point.
  const MatrixXd& k = set.neg_n22_pinv();
  for (Eigen::Index p = 0; p < premise_points.cols(); ++p) {
    const VectorXd kb = k * basis.Evaluate(premise_points.col(p));
    for (const int i : curved) {
      if (kb(i) < 0.0) return report;
    }
  }
  report.gc_convex = true;
  report.route = ConvexityRoute::kUncertainty;
  report.sampled_premise = true;
  return report;
}

VectorXd GradGc(const ParameterSet& set, const BasisSet& basis,
                const VectorXd& z, const VectorXd& c) {
  Require(set.compact(), ErrorCode::kNotCompact,
          "the gradient formula needs a compact set");
  Require(basis.has_analytic_jacobian(), ErrorCode::kMissingJacobian,
          "the gradient formula needs an analytic basis Jacobian");
  Require(c.size() == set.m(), ErrorCode::kDimensionMismatch,
          "direction has the wrong size");
  const VectorXd b = basis.Evaluate(z);
  Require(b.squaredNorm() > 0.0, ErrorCode::kZeroBasisVector,
          "the gradient formula is singular where b(z) = 0");
  const MatrixXd j = basis.Jacobian(z);
  const MatrixXd& k = set.neg_n22_pinv();
  VectorXd grad = j.transpose() * (set.lse() * c);
  const double sc = std::max(0.0, c.dot(set.schur() * c));
  if (sc > 0.0) {
    const VectorXd kb = k * b;
    const double bkb = b.dot(kb);
    Require(bkb > 0.0, ErrorCode::kZeroBasisVector,
            "the gradient formula is singular where b(z) = 0");
    grad += std::sqrt(sc / bkb) * (j.transpose() * kb);
  }
  return grad;
}

GcMinimum MinimizeGc(const ParameterSet& set, const BasisSet& basis,
                     const VectorXd& c, const ConvexDomain& domain,
                     const MinimizeOptions& options) {
  Require(domain.dim() == basis.input_dim(), ErrorCode::kDimensionMismatch,
          "domain and basis dimensions differ");
  auto f = [&](const VectorXd& z) { return LinearBound(set, basis, z, c).value; };
  const bool analytic = set.compact() && basis.has_analytic_jacobian();
  auto grad = [&](const VectorXd& z) -> VectorXd {
    if (analytic && basis.Evaluate(z).squaredNorm() > 0.0) {
      return GradGc(set, basis, z, c);
    }
    return CentralDifferenceGradient(f, z);
  };
  auto project = [&](const VectorXd& z) { return domain.Project(z); };
  const VectorXd start = options.start ? *options.start : domain.Anchor();
  const DescentResult r =
      ProjectedGradientDescent(f, grad, project, start, options.descent);
  GcMinimum out;
  out.z = r.x;
  out.value = f(r.x);
  out.converged = r.converged;
  out.iterations = r.iterations;
  out.global = ConvexityCertificate(set, basis, c).gc_convex;
  return out;
}

LipschitzCheck LipschitzPairCheck(const ParameterSet& set, const BasisSet& basis,
                                  const VectorXd& z, const VectorXd& z_star,
                                  double lipschitz, const MatrixXd& p,
                                  const MatrixXd& q) {
  Require(lipschitz >= 0.0, ErrorCode::kInvalidArgument,
          "Lipschitz constant must be nonnegative");
  const MatrixXd pw = WeightOrIdentity(p, set.m(), "output");
  const MatrixXd qw = WeightOrIdentity(q, basis.input_dim(), "input");
  const VectorXd dz = z - z_star;
  const double dist = std::sqrt(dz.dot(qw * dz));
  Require(dist > 0.0, ErrorCode::kCoincidentPoints, "the two points coincide");
  const MatrixXd d = (basis.Evaluate(z) - basis.Evaluate(z_star)) / dist;
  return FromResult(SolveAffineLmi(
      BorderedNormLmi(set, d, pw.inverse(), lipschitz * lipschitz)));
}

LipschitzCheck LipschitzJacobianCheck(const ParameterSet& set,
                                      const BasisSet& basis, const VectorXd& z,
                                      double lipschitz, const MatrixXd& p,
                                      const MatrixXd& q) {
  Require(basis.has_analytic_jacobian(), ErrorCode::kMissingJacobian,
          "the Jacobian check needs an analytic basis Jacobian");
  Require(lipschitz >= 0.0, ErrorCode::kInvalidArgument,
          "Lipschitz constant must be nonnegative");
  const MatrixXd pw = WeightOrIdentity(p, set.m(), "output");
  const MatrixXd qw = WeightOrIdentity(q, basis.input_dim(), "input");
  const MatrixXd d = basis.Jacobian(z) * PdInverseSqrt(qw);
  return FromResult(SolveAffineLmi(
      BorderedNormLmi(set, d, pw.inverse(), lipschitz * lipschitz)));
}

LipschitzCheck LipschitzGlobalCheck(const ParameterSet& set, double lipschitz,
                                    double basis_lipschitz, const MatrixXd& p) {
  Require(lipschitz >= 0.0 && basis_lipschitz >= 0.0, ErrorCode::kInvalidArgument,
          "Lipschitz constants must be nonnegative");
  const MatrixXd pw = WeightOrIdentity(p, set.m(), "output");
  // Same as the bordered form with D = L_b I after dropping the border.
  const MatrixXd d = basis_lipschitz * MatrixXd::Identity(set.k(), set.k());
  return FromResult(SolveAffineLmi(
      BorderedNormLmi(set, d, pw.inverse(), lipschitz * lipschitz)));
}

LipschitzCheck LipschitzGlobalCheck(const ParameterSet& set,
                                    const BasisSet& basis, double lipschitz,
                                    const MatrixXd& p) {
  Require(basis.metadata().lipschitz.has_value(), ErrorCode::kMissingLb,
          "basis declares no Lipschitz constant");
  return LipschitzGlobalCheck(set, lipschitz, *basis.metadata().lipschitz, p);
}

LipschitzConstant MinimalJacobianLipschitz(const ParameterSet& set,
                                           const BasisSet& basis,
                                           const VectorXd& z, const MatrixXd& p,
                                           const MatrixXd& q) {
  Require(basis.has_analytic_jacobian(), ErrorCode::kMissingJacobian,
          "the Jacobian check needs an analytic basis Jacobian");
  const MatrixXd pw = WeightOrIdentity(p, set.m(), "output");
  const MatrixXd qw = WeightOrIdentity(q, basis.input_dim(), "input");
  return MinimalBorderedNorm(set, basis.Jacobian(z) * PdInverseSqrt(qw), pw);
}

LipschitzConstant MinimalGlobalLipschitz(const ParameterSet& set,
                                         double basis_lipschitz,
                                         const MatrixXd& p) {
  Require(basis_lipschitz >= 0.0, ErrorCode::kInvalidArgument,
          "Lipschitz constant must be nonnegative");
  const MatrixXd pw = WeightOrIdentity(p, set.m(), "output");
  return MinimalBorderedNorm(
      set, basis_lipschitz * MatrixXd::Identity(set.k(), set.k()), pw);
}

}  // namespace cautious
