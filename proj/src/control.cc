#include "cautious/control.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "cautious/bounds.h"
#include "cautious/certificates.h"
#include "cautious/error.h"
#include "cautious/lmi.h"
#include "cautious/qmi.h"

namespace cautious {
namespace {

constexpr double kMultiplierUpper = 1e8;

MatrixXd WeightOrIdentity(const MatrixXd& p, int n) {
  if (p.size() == 0) return MatrixXd::Identity(n, n);
  Require(p.rows() == n && p.cols() == n, ErrorCode::kDimensionMismatch,
          "weight has the wrong size");
  Require(IsSymmetric(p), ErrorCode::kNotSymmetric, "weight is not symmetric");
  Require(IsPositiveDefinite(p), ErrorCode::kNotPositiveDefinite,
          "weight must be positive definite");
  return Symmetrize(p);
}

double Condition(const MatrixXd& p) {
  return MaxEigenvalue(p) / MinEigenvalue(p);
}

void RequireSelfMap(const ParameterSet& set, const BasisSet& basis) {
  Require(set.k() == basis.size(), ErrorCode::kDimensionMismatch,
          "basis size does not match the set");
  Require(set.m() == basis.input_dim(), ErrorCode::kDimensionMismatch,
          "contraction needs a map from R^n to itself");
}

// E_ii and E_ij + E_ji, the coordinates of a symmetric n x n matrix.
std::vector<MatrixXd> SymmetricCoordinates(int n) {
  std::vector<MatrixXd> out;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      MatrixXd e = MatrixXd::Zero(n, n);
      e(i, j) = 1.0;
      e(j, i) = 1.0;
      out.push_back(e);
    }
  }
  return out;
}

MatrixXd FromCoordinates(const std::vector<MatrixXd>& basis, const VectorXd& x) {
  MatrixXd out = MatrixXd::Zero(basis.front().rows(), basis.front().cols());
  for (size_t i = 0; i < basis.size(); ++i) {
    out += x(static_cast<Eigen::Index>(i)) * basis[i];
  }
  return out;
}

struct LinearSplit {
  MatrixXd linear;     // m x n, columns of theta^T at the linear indices
  MatrixXd remainder;  // m x (k - n)
  MatrixXd selector;   // m x k, the E with E b(z) = z for the linear part
  double remainder_norm;
  double jacobian_norm;
};

LinearSplit Split(const MatrixXd& theta, const BasisSet& basis) {
  const auto& md = basis.metadata();
  Require(md.linear_part.has_value(), ErrorCode::kMissingDecomposition,
          "basis declares no linear part");
  const auto& idx = md.linear_part->indices;
  const int n = basis.input_dim();
  const auto k = theta.rows();
  const auto m = theta.cols();
  Require(k == basis.size(), ErrorCode::kDimensionMismatch,
          "parameter rows do not match the basis size");
  Require(m == n && static_cast<int>(idx.size()) == n,
          ErrorCode::kDimensionMismatch,
          "the one-sided estimate needs a map from R^n to itself");
  LinearSplit s;
  s.linear.resize(m, n);
  s.selector = MatrixXd::Zero(m, k);
  std::vector<bool> is_linear(static_cast<size_t>(k), false);
  for (int j = 0; j < n; ++j) {
    const int i = idx[static_cast<size_t>(j)];
    s.linear.col(j) = theta.row(i).transpose();
    s.selector(j, i) = 1.0;
    is_linear[static_cast<size_t>(i)] = true;
  }
  s.remainder.resize(m, k - n);
  Eigen::Index c = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (!is_linear[static_cast<size_t>(i)]) s.remainder.col(c++) = theta.row(i).transpose();
  }
  s.remainder_norm = md.linear_part->remainder_jacobian_norm;
  s.jacobian_norm = md.jacobian_norm_bound.value_or(
      std::numeric_limits<double>::quiet_NaN());
  return s;
}

double ShiftEstimate(const MatrixXd& theta_t, const LinearSplit& s,
                     const MatrixXd& p_sqrt, double p_isqrt_norm, double a) {
  Require(std::isfinite(s.jacobian_norm), ErrorCode::kMissingMetadata,
          "the shift estimate needs a Jacobian-norm bound");
  return a + SpectralNorm(p_sqrt * (theta_t - a * s.selector)) * s.jacobian_norm *
                 p_isqrt_norm;
}

double SplitEstimate(const LinearSplit& s, const MatrixXd& p_sqrt,
                     const MatrixXd& p_isqrt) {
  const MatrixXd a = p_sqrt * s.linear * p_isqrt;
  double out = MaxEigenvalue(Symmetrize(a));
  if (s.remainder.cols() > 0 && s.remainder_norm > 0.0) {
    out += SpectralNorm(p_sqrt * s.remainder) * s.remainder_norm *
           SpectralNorm(p_isqrt);
  }
  return out;
}

// Golden-section minimum of a convex function on [lo, hi].
double GoldenMinimum(const std::function<double(double)>& f, double lo, double hi,
                     double* argmin) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < 200 && b - a > 1e-13 * (1.0 + std::abs(a) + std::abs(b)); ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  const double x = fc < fd ? c : d;
  if (argmin != nullptr) *argmin = x;
  return std::min(fc, fd);
}

double BestShiftEstimate(const MatrixXd& theta_t, const LinearSplit& s,
                         const MatrixXd& p_sqrt, const MatrixXd& p_isqrt) {
  const double pin = SpectralNorm(p_isqrt);
  const double radius = 2.0 * SpectralNorm(p_sqrt * s.linear * p_isqrt) + 1.0;
  return GoldenMinimum(
      [&](double a) { return ShiftEstimate(theta_t, s, p_sqrt, pin, a); }, -radius,
      radius, nullptr);
}

MatrixXd StabilityLmiMatrix(const SystemSet& sys, const MatrixXd& p, double beta) {
  const int n = sys.n();
  const int r = sys.r();
  MatrixXd f = MatrixXd::Zero(2 * n + r, 2 * n + r);
  f.topLeftCorner(n, n) = p - beta * MatrixXd::Identity(n, n);
  f.block(n, n, n, n) = -p;
  return f - sys.params().n().full();
}

// [[G - gamma M, v], [v^T, e]] with G = [[I, -I, 0], [-I, I, 0], [0, 0, 0]]
// and v = (x, -x, -u): the fixed-point radius LMI in (gamma, u) at fixed e.
AffineLmi RadiusLmi(const SystemSet& sys, const VectorXd& x, double e,
                    double u_box) {
  const int n = sys.n();
  const int r = sys.r();
  const int size = 2 * n + r + 1;
  AffineLmi lmi;
  lmi.constant = MatrixXd::Zero(size, size);
  lmi.constant.topLeftCorner(n, n).setIdentity();
  lmi.constant.block(n, n, n, n).setIdentity();
  lmi.constant.block(0, n, n, n) = -MatrixXd::Identity(n, n);
  lmi.constant.block(n, 0, n, n) = -MatrixXd::Identity(n, n);
  lmi.constant.block(0, size - 1, n, 1) = x;
  lmi.constant.block(n, size - 1, n, 1) = -x;
  lmi.constant.block(size - 1, 0, 1, n) = x.transpose();
  lmi.constant.block(size - 1, n, 1, n) = -x.transpose();
  lmi.constant(size - 1, size - 1) = e;
  MatrixXd gamma_term = MatrixXd::Zero(size, size);
  gamma_term.topLeftCorner(size - 1, size - 1) = -sys.params().n().full();
  lmi.terms.push_back(gamma_term);
  for (int j = 0; j < r; ++j) {
    MatrixXd t = MatrixXd::Zero(size, size);
    t(2 * n + j, size - 1) = -1.0;
    t(size - 1, 2 * n + j) = -1.0;
    lmi.terms.push_back(t);
  }
  lmi.lower = VectorXd::Constant(1 + r, -u_box);
  lmi.upper = VectorXd::Constant(1 + r, u_box);
  lmi.lower(0) = 0.0;
  lmi.upper(0) = kMultiplierUpper;
  return lmi;
}

// Box for the input variables: a generous multiple of the input that puts
// the fixed point of the estimated system at x.
double InputBox(const SystemSet& sys, double state_radius) {
  const MatrixXd lse = sys.params().center();
  const MatrixXd a = sys.A(lse);
  const MatrixXd b = sys.B(lse);
  const MatrixXd i_minus_a = MatrixXd::Identity(sys.n(), sys.n()) - a;
  const double gain = SpectralNorm(PseudoInverse(b) * i_minus_a);
  return 10.0 * (gain * state_radius + state_radius + 1.0);
}

double MaxNormOnBox(const Box& box) {
  return box.lower.cwiseAbs().cwiseMax(box.upper.cwiseAbs()).norm();
}

// Congruence T = [[I, 0], [center, (-M22)^{-1/2}]] with T^T M T =
// blkdiag(M|M22, -I). Conditions of the form X - alpha M >= 0 keep their
// solution set under X -> T^T X T, and the data scale drops out, which the
// barrier solver needs when M spans many orders of magnitude.
MatrixXd CenteringCongruence(const ParameterSet& set) {
  const int u = set.m();
  const int v = set.k();
  MatrixXd t = MatrixXd::Identity(u + v, u + v);
  if (!set.compact()) return t;
  const EllipsoidalForm form = set.ellipsoid();
  t.block(u, 0, v, u) = form.center;
  t.block(u, u, v, v) = form.left;
  return t;
}

AffineLmi Congruence(const AffineLmi& lmi, const MatrixXd& t) {
  AffineLmi out = lmi;
  out.constant = Symmetrize(t.transpose() * lmi.constant * t);
  for (MatrixXd& term : out.terms) term = Symmetrize(t.transpose() * term * t);
  return out;
}

MatrixXd WithCorner(const MatrixXd& t, int extra) {
  const auto d = t.rows();
  MatrixXd out = MatrixXd::Identity(d + extra, d + extra);
  out.topLeftCorner(d, d) = t;
  return out;
}

}  // namespace

const char* ContractionRouteName(ContractionRoute route) {
  switch (route) {
    case ContractionRoute::kAffineJacobian: return "affine_jacobian";
    case ContractionRoute::kGlobalLipschitz: return "global_lipschitz";
    case ContractionRoute::kJacobianGrid: return "jacobian_grid";
    case ContractionRoute::kLseMargin: return "lse_margin";
  }
  return "unknown";
}

const char* RegulationRouteName(RegulationRoute route) {
  switch (route) {
    case RegulationRoute::kJointLmi: return "joint_lmi";
    case RegulationRoute::kMultiStart: return "multi_start";
  }
  return "unknown";
}

ContractionCertificate DtContraction(const ParameterSet& set,
                                     const BasisSet& basis, const MatrixXd& p,
                                     const MatrixXd& grid) {
  RequireSelfMap(set, basis);
  const int n = basis.input_dim();
  const MatrixXd pw = WeightOrIdentity(p, n);
  ContractionCertificate cert;
  cert.mode = ContractionMode::kDiscrete;
  cert.p = pw;
  const auto& md = basis.metadata();
  const bool constant_jacobian = basis.has_analytic_jacobian() && md.all_affine();
  if (constant_jacobian) {
    cert.route = ContractionRoute::kAffineJacobian;
    cert.rate = MinimalJacobianLipschitz(set, basis, VectorXd::Zero(n), pw, pw).value;
  } else if (grid.cols() > 0) {
    Require(grid.rows() == n, ErrorCode::kDimensionMismatch,
            "grid points have the wrong dimension");
    cert.route = ContractionRoute::kJacobianGrid;
    for (Eigen::Index g = 0; g < grid.cols(); ++g) {
      cert.rate = std::max(
          cert.rate, MinimalJacobianLipschitz(set, basis, grid.col(g), pw, pw).value);
    }
  } else {
    Require(md.lipschitz.has_value(), ErrorCode::kMissingLb,
            "basis declares no Lipschitz constant");
    cert.route = ContractionRoute::kGlobalLipschitz;
    // ||z - z*||_2 <= ||z - z*||_P / sqrt(lambda_min(P)).
    const double lb = *md.lipschitz / std::sqrt(MinEigenvalue(pw));
    cert.rate = MinimalGlobalLipschitz(set, lb, pw).value;
  }
  cert.margin = 1.0 - cert.rate;
  cert.certified = cert.rate < 1.0 - RelativeTolerance();
  return cert;
}

OslVerdict OslPairTest(const ParameterSet& set, const BasisSet& basis,
                       const VectorXd& z, const VectorXd& z_star, double gamma,
                       const MatrixXd& p) {
  RequireSelfMap(set, basis);
  Require(set.compact(), ErrorCode::kNotCompact,
          "the closed-form test needs a compact set");
  const MatrixXd pw = WeightOrIdentity(p, basis.input_dim());
  const VectorXd dz = z - z_star;
  Require(dz.squaredNorm() > 0.0, ErrorCode::kCoincidentPoints,
          "the two points coincide");
  const VectorXd db = basis.Evaluate(z) - basis.Evaluate(z_star);
  const VectorXd pdz = pw * dz;
  OslVerdict v;
  const double spread = std::max(0.0, pdz.dot(set.schur() * pdz)) *
                        std::max(0.0, db.dot(set.neg_n22_pinv() * db));
  v.lhs = pdz.dot(set.lse().transpose() * db) + std::sqrt(spread);
  v.rhs = gamma * dz.dot(pdz);
  v.holds = v.lhs <= v.rhs + RelativeTolerance() * (1.0 + std::abs(v.lhs) + std::abs(v.rhs));
  return v;
}

double OslUpperEstimate(const MatrixXd& theta, const BasisSet& basis,
                        OslEstimateMode mode, double shift, const MatrixXd& p) {
  const LinearSplit s = Split(theta, basis);
  const MatrixXd pw = WeightOrIdentity(p, basis.input_dim());
  const MatrixXd p_sqrt = PsdSqrt(pw);
  const MatrixXd p_isqrt = PdInverseSqrt(pw);
  const MatrixXd theta_t = theta.transpose();
  switch (mode) {
    case OslEstimateMode::kShift:
      return ShiftEstimate(theta_t, s, p_sqrt, SpectralNorm(p_isqrt), shift);
    case OslEstimateMode::kLinearRemainder:
      return SplitEstimate(s, p_sqrt, p_isqrt);
    case OslEstimateMode::kBest: {
      double best = SplitEstimate(s, p_sqrt, p_isqrt);
      if (std::isfinite(s.jacobian_norm)) {
        best = std::min(best, BestShiftEstimate(theta_t, s, p_sqrt, p_isqrt));
      }
      return best;
    }
  }
  return std::numeric_limits<double>::infinity();
}

OslMargin OslLseMargin(const ParameterSet& set, const BasisSet& basis,
                       const MatrixXd& p, double weighted_lipschitz,
                       OslEstimateMode mode) {
  RequireSelfMap(set, basis);
  Require(set.compact(), ErrorCode::kNotCompact,
          "the estimate margin needs a compact set");
  Require(weighted_lipschitz >= 0.0, ErrorCode::kInvalidArgument,
          "Lipschitz constant must be nonnegative");
  const MatrixXd pw = WeightOrIdentity(p, basis.input_dim());
  OslMargin out;
  if (mode == OslEstimateMode::kShift) {
    const LinearSplit s = Split(set.lse(), basis);
    out.estimate = BestShiftEstimate(set.lse().transpose(), s, PsdSqrt(pw),
                                     PdInverseSqrt(pw));
  } else {
    out.estimate = OslUpperEstimate(set.lse(), basis, mode, 0.0, pw);
  }
  out.correction = weighted_lipschitz *
                   std::sqrt(std::max(0.0, MaxEigenvalue(set.schur()))) *
                   Condition(pw);
  out.gamma = out.estimate + out.correction;
  out.threshold = -out.correction;
  out.certified = out.estimate < out.threshold;
  return out;
}

OslMargin OslLseMargin(const ParameterSet& set, const BasisSet& basis,
                       const MatrixXd& p, OslEstimateMode mode) {
  Require(basis.metadata().jacobian_norm_bound.has_value(), ErrorCode::kMissingMetadata,
          "basis declares no Jacobian-norm bound");
  Require(set.compact(), ErrorCode::kNotCompact,
          "the estimate margin needs a compact set");
  const double top = MaxEigenvalue(set.n().m22());
  const double lw = *basis.metadata().jacobian_norm_bound / std::sqrt(-top);
  return OslLseMargin(set, basis, p, lw, mode);
}

ContractionCertificate CtContraction(const ParameterSet& set,
                                     const BasisSet& basis, const MatrixXd& p) {
  const MatrixXd pw = WeightOrIdentity(p, basis.input_dim());
  const OslMargin margin = OslLseMargin(set, basis, pw);
  ContractionCertificate cert;
  cert.mode = ContractionMode::kContinuous;
  cert.p = pw;
  cert.rate = margin.gamma;
  cert.route = ContractionRoute::kLseMargin;
  cert.margin = margin.threshold - margin.estimate;
  cert.certified = margin.certified;
  return cert;
}

StabilityResult QuadraticStability(const SystemSet& sys) {
  const int n = sys.n();
  const int r = sys.r();
  const MatrixXd& m = sys.params().n().full();
  const int big = 2 * n + r;
  const int size = big + n + 1;
  const auto coords = SymmetricCoordinates(n);
  AffineLmi lmi;
  lmi.constant = MatrixXd::Zero(size, size);
  lmi.constant.topLeftCorner(big, big) = -m;
  for (const MatrixXd& e : coords) {
    MatrixXd t = MatrixXd::Zero(size, size);
    t.topLeftCorner(n, n) = e;
    t.block(n, n, n, n) = -e;
    t.block(big, big, n, n) = e;
    lmi.terms.push_back(t);
  }
  MatrixXd beta_term = MatrixXd::Zero(size, size);
  beta_term.topLeftCorner(n, n) = -MatrixXd::Identity(n, n);
  beta_term(size - 1, size - 1) = 1.0;
  lmi.terms.push_back(beta_term);
  // The (2,2) block forces P <= the data block of -M, so this box is loose.
  const double box = 2.0 * SpectralNorm(m) + 1.0;
  const auto vars = static_cast<Eigen::Index>(lmi.terms.size());
  lmi.lower = VectorXd::Constant(vars, -box);
  lmi.upper = VectorXd::Constant(vars, box);
  lmi.lower(vars - 1) = 0.0;
  // Start from P = I scaled into the box.
  VectorXd start = VectorXd::Zero(vars);
  {
    Eigen::Index i = 0;
    for (int a = 0; a < n; ++a) {
      for (int b = a; b < n; ++b, ++i) {
        if (a == b) start(i) = 1e-3 * box;
      }
    }
  }
  const MatrixXd frame = CenteringCongruence(sys.params());
  LmiOptions opts;
  opts.maximize = true;
  opts.warm_start = start;
  const LmiResult res = SolveAffineLmi(Congruence(lmi, WithCorner(frame, n + 1)), opts);
  StabilityResult out;
  out.best_min_eigenvalue = res.min_eigenvalue;
  if (!(res.min_eigenvalue > 0.0)) return out;
  const MatrixXd p_bar = Symmetrize(FromCoordinates(coords, res.witness.head(vars - 1)));
  const double beta = res.witness(vars - 1);
  // Exact re-verification of the stability lemma's inequality, evaluated in
  // the centered frame (an invertible congruence).
  const MatrixXd check = frame.transpose() * StabilityLmiMatrix(sys, p_bar, beta) * frame;
  if (!(beta > 0.0) || !IsPositiveDefinite(p_bar) || MinEigenvalue(Symmetrize(check)) < 0.0) {
    return out;
  }
  out.certificate = StabilityCertificate{p_bar, beta};
  return out;
}

double CertifiedLyapunovRatio(const SystemSet& sys, const MatrixXd& p) {
  const int n = sys.n();
  const int r = sys.r();
  const MatrixXd pw = WeightOrIdentity(p, n);
  const int size = 2 * n + r;
  AffineLmi lmi;
  lmi.constant = MatrixXd::Zero(size, size);
  lmi.constant.block(n, n, n, n) = -pw;
  lmi.terms = {-sys.params().n().full()};
  lmi.lower = VectorXd::Zero(1);
  lmi.upper = VectorXd::Constant(1, kMultiplierUpper);
  const MatrixXd frame = CenteringCongruence(sys.params());
  VectorXd last;
  auto feasible = [&](double lambda) {
    lmi.constant.topLeftCorner(n, n) = lambda * pw;
    LmiOptions opts;
    opts.strict = true;
    opts.warm_start = last;
    const LmiResult res = SolveAffineLmi(Congruence(lmi, frame), opts);
    if (res.feasible) last = res.witness;
    return res.feasible;
  };
  const MatrixXd p_isqrt = PdInverseSqrt(pw);
  const MatrixXd a = sys.A(sys.params().center());
  const double lower = std::pow(SpectralNorm(p_isqrt * a * PsdSqrt(pw)), 2);
  double upper = std::max(1.0, 2.0 * lower);
  int tries = 0;
  while (!feasible(upper)) {
    if (++tries > 40) return std::numeric_limits<double>::infinity();
    upper *= 2.0;
  }
  return BisectSmallestFeasible(lower, upper, feasible, 80);
}

double SampledLyapunovRatio(const SystemSet& sys, const MatrixXd& p, int samples,
                            std::uint64_t seed) {
  const MatrixXd pw = WeightOrIdentity(p, sys.n());
  const MatrixXd p_isqrt = PdInverseSqrt(pw);
  const MatrixXd p_sqrt = PsdSqrt(pw);
  double worst = 0.0;
  for (const auto& member :
       SampleQmiSet(sys.params().n(), samples, SampleMode::kBoundary, seed)) {
    worst = std::max(worst, std::pow(SpectralNorm(p_isqrt * sys.A(member) * p_sqrt), 2));
  }
  return worst;
}

EpsilonMinus EpsilonMinusAt(const SystemSet& sys, const VectorXd& x) {
  Require(sys.stability().has_value(), ErrorCode::kStabilityNotCertified,
          "the fixed-point radius needs a stability certificate");
  Require(x.size() == sys.n(), ErrorCode::kDimensionMismatch,
          "state has the wrong dimension");
  EpsilonMinus out;
  out.u = VectorXd::Zero(sys.r());
  const double hi = x.squaredNorm();
  if (hi == 0.0) return out;
  const AffineLmi lmi = Congruence(RadiusLmi(sys, x, hi, InputBox(sys, x.norm())),
                                   WithCorner(CenteringCongruence(sys.params()), 1));
  AffineLmi work = lmi;
  VectorXd last;
  auto feasible = [&](double e) {
    // The corner entry is untouched by the congruence.
    work.constant(lmi.size() - 1, lmi.size() - 1) = e;
    LmiOptions opts;
    opts.strict = true;
    opts.warm_start = last;
    const LmiResult res = SolveAffineLmi(work, opts);
    if (res.feasible) last = res.witness;
    return res.feasible;
  };
  // u = 0, gamma = 0 is feasible at e = ||x||^2, so the upper end needs no
  // solve.
  const double e = BisectSmallestFeasible(0.0, hi, feasible, 50, 1e-14);
  out.value = std::sqrt(e);
  if (last.size() > 0 && e < hi) {
    out.gamma = last(0);
    out.u = last.tail(sys.r());
  }
  return out;
}

namespace {

// delta + L * eps over jointly feasible (x, u, delta, eps, alpha, gamma) is
// at most s, with the norm-bound and radius LMIs divided by delta and eps.
class JointRegulationLmi {
 public:
  JointRegulationLmi(const ParameterSet& set, const BasisSet& basis,
                     const SystemSet& sys, double lipschitz, const Box& region,
                     double s_upper)
      : n_(sys.n()), r_(sys.r()) {
    const int m = set.m();
    const int k = set.k();
    const VectorXd b0 = basis.Evaluate(VectorXd::Zero(n_));
    const MatrixXd jb = basis.Jacobian(VectorXd::Zero(n_));
    const int g_size = m + k + 1;
    const int e_size = 2 * n_ + r_ + 1;
    size_ = g_size + e_size + 1;
    const int vars = n_ + r_ + 4;
    delta_ = n_ + r_;
    eps_ = delta_ + 1;
    const int alpha = delta_ + 2;
    const int gamma = delta_ + 3;
    lmi_.constant = MatrixXd::Zero(size_, size_);
    lmi_.terms.assign(static_cast<size_t>(vars), MatrixXd::Zero(size_, size_));
    auto term = [&](int v) -> MatrixXd& { return lmi_.terms[static_cast<size_t>(v)]; };
    auto sym = [](MatrixXd& t, int i, int j, double v) {
      t(i, j) += v;
      if (i != j) t(j, i) += v;
    };

    // Norm-bound block at offset 0.
    const int corner = m + k;
    for (int i = 0; i < k; ++i) sym(lmi_.constant, m + i, corner, b0(i));
    for (int j = 0; j < n_; ++j) {
      for (int i = 0; i < k; ++i) sym(term(j), m + i, corner, jb(i, j));
    }
    for (int i = 0; i < m; ++i) term(delta_)(i, i) = 1.0;
    term(delta_)(corner, corner) = 1.0;
    term(alpha).topLeftCorner(m + k, m + k) = -set.n().full();

    // Radius block.
    const int o = g_size;
    const int ecorner = o + e_size - 1;
    for (int i = 0; i < n_; ++i) {
      term(eps_)(o + i, o + i) = 1.0;
      term(eps_)(o + n_ + i, o + n_ + i) = 1.0;
      sym(term(eps_), o + i, o + n_ + i, -1.0);
      sym(term(i), o + i, ecorner, 1.0);
      sym(term(i), o + n_ + i, ecorner, -1.0);
    }
    term(eps_)(ecorner, ecorner) = 1.0;
    for (int j = 0; j < r_; ++j) sym(term(n_ + j), o + 2 * n_ + j, ecorner, -1.0);
    term(gamma).block(o, o, e_size - 1, e_size - 1) = -sys.params().n().full();

    // s - delta - L eps >= 0.
    scalar_ = size_ - 1;
    term(delta_)(scalar_, scalar_) = -1.0;
    term(eps_)(scalar_, scalar_) = -lipschitz;

    const double u_box = InputBox(sys, MaxNormOnBox(region));
    lmi_.lower = VectorXd::Zero(vars);
    lmi_.upper = VectorXd::Zero(vars);
    lmi_.lower.head(n_) = region.lower;
    lmi_.upper.head(n_) = region.upper;
    lmi_.lower.segment(n_, r_).setConstant(-u_box);
    lmi_.upper.segment(n_, r_).setConstant(u_box);
    lmi_.upper(delta_) = s_upper + 1.0;
    lmi_.upper(eps_) = MaxNormOnBox(region) + 1.0;
    lmi_.upper(alpha) = kMultiplierUpper;
    lmi_.upper(gamma) = kMultiplierUpper;

    MatrixXd t = MatrixXd::Identity(size_, size_);
    t.topLeftCorner(m + k, m + k) = CenteringCongruence(set);
    t.block(o, o, e_size - 1, e_size - 1) = CenteringCongruence(sys.params());
    lmi_ = Congruence(lmi_, t);
  }

  bool Feasible(double s) {
    lmi_.constant(scalar_, scalar_) = s;
    LmiOptions opts;
    opts.strict = true;
    opts.warm_start = last_;
    const LmiResult res = SolveAffineLmi(lmi_, opts);
    if (res.feasible) last_ = res.witness;
    return res.feasible;
  }

  bool has_witness() const { return last_.size() > 0; }
  VectorXd x() const { return last_.head(n_); }

 private:
  int n_, r_, size_ = 0, delta_ = 0, eps_ = 0, scalar_ = 0;
  AffineLmi lmi_;
  VectorXd last_;
};

void EvaluateAt(const ParameterSet& set, const BasisSet& basis,
                const SystemSet& sys, double lipschitz, const VectorXd& x,
                RegulationResult* out) {
  const EpsilonMinus em = EpsilonMinusAt(sys, x);
  out->x_star = x;
  out->u_star = em.u;
  out->delta = NormBound(set, basis, x).value;
  out->epsilon_minus = em.value;
  out->bound = out->delta + lipschitz * em.value;
}

}  // namespace

RegulationResult SuboptimalRegulation(const ParameterSet& set,
                                      const BasisSet& basis,
                                      const SystemSet& sys, double lipschitz,
                                      const Box& region,
                                      const RegulationOptions& options) {
  Require(sys.stability().has_value(), ErrorCode::kStabilityNotCertified,
          "suboptimal regulation needs a stability certificate");
  Require(lipschitz >= 0.0, ErrorCode::kInvalidArgument,
          "Lipschitz constant must be nonnegative");
  Require(region.dim() == sys.n() && basis.input_dim() == sys.n(),
          ErrorCode::kDimensionMismatch, "state dimensions disagree");
  Require(set.k() == basis.size(), ErrorCode::kDimensionMismatch,
          "basis size does not match the set");

  RegulationResult best;
  EvaluateAt(set, basis, sys, lipschitz, region.Center(), &best);

  const bool affine = basis.metadata().all_affine() && basis.has_analytic_jacobian();
  if (affine) {
    best.route = RegulationRoute::kJointLmi;
    JointRegulationLmi joint(set, basis, sys, lipschitz, region, best.bound);
    BisectSmallestFeasible(0.0, best.bound,
                           [&](double s) { return joint.Feasible(s); }, 60, 1e-9);
    if (joint.has_witness()) {
      RegulationResult cand;
      EvaluateAt(set, basis, sys, lipschitz, region.Project(joint.x()), &cand);
      if (cand.bound < best.bound) best = cand;
    }
    best.route = RegulationRoute::kJointLmi;
  } else {
    best.route = RegulationRoute::kMultiStart;
    auto f = [&](const VectorXd& x) {
      return NormBound(set, basis, x).value + lipschitz * EpsilonMinusAt(sys, x).value;
    };
    auto grad = [&](const VectorXd& x) { return CentralDifferenceGradient(f, x); };
    auto project = [&](const VectorXd& x) { return region.Project(x); };
    std::mt19937_64 rng(options.seed);
    DescentOptions descent;
    descent.max_iterations = options.max_iterations;
    descent.tolerance = 1e-6;
    for (int s = 0; s < options.starts; ++s) {
      VectorXd x0 = region.Center();
      if (s > 0) {
        for (int i = 0; i < x0.size(); ++i) {
          std::uniform_real_distribution<double> u(region.lower(i), region.upper(i));
          x0(i) = u(rng);
        }
      }
      const DescentResult d = ProjectedGradientDescent(f, grad, project, x0, descent);
      RegulationResult cand;
      EvaluateAt(set, basis, sys, lipschitz, d.x, &cand);
      if (cand.bound < best.bound) best = cand;
    }
    best.route = RegulationRoute::kMultiStart;
  }

  const MatrixXd& p = sys.stability()->p;
  best.transient.condition = Condition(p);
  best.transient.lyapunov_ratio = CertifiedLyapunovRatio(sys, p);
  best.transient.sampled_ratio =
      SampledLyapunovRatio(sys, p, options.transient_samples, options.seed);
  best.transient.factor = std::sqrt(best.transient.lyapunov_ratio);
  return best;
}

std::function<double(int)> TransientBound(const MatrixXd& p, double lipschitz,
                                          double delta, const VectorXd& x0,
                                          const VectorXd& x_star, double factor) {
  Require(factor >= 0.0 && factor < 1.0, ErrorCode::kLambdaOutOfRange,
          "the contraction factor must lie in [0, 1)");
  const MatrixXd pw = WeightOrIdentity(p, static_cast<int>(x0.size()));
  Require(x_star.size() == x0.size(), ErrorCode::kDimensionMismatch,
          "states have different dimensions");
  const double scale = lipschitz * Condition(pw) * (x0 - x_star).norm();
  return [=](int k) { return delta + std::pow(factor, k) * scale; };
}

}  // namespace cautious
