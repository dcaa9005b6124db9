#include "cautious/bounds.h"

#include <cmath>
#include <limits>

#include "cautious/error.h"
#include "cautious/lmi.h"

namespace cautious {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// For an unbounded set with b in the range of N22, directions in the kernel
// of N22 never change theta^T b, so the supremum equals the one over the set
// restricted to range(N22).
struct Reduced {
  ParameterSet set;
  VectorXd b;
};

std::optional<Reduced> ReduceToRange(const ParameterSet& set, const VectorXd& b) {
  if (set.compact()) return Reduced{set, b};
  const MatrixXd n22 = set.n().m22();
  if (!InRange(n22, b)) return std::nullopt;
  const MatrixXd u = RangeBasis(n22);
  Require(u.cols() >= 1, ErrorCode::kNotCompact,
          "no informative direction in the data");
  const int m = set.m();
  const auto r = u.cols();
  MatrixXd full(m + r, m + r);
  const MatrixXd n12u = set.n().m12() * u;
  full << set.n().m11(), n12u, n12u.transpose(), u.transpose() * n22 * u;
  return Reduced{ParameterSet(PartitionedSymmetric(full, m)), u.transpose() * b};
}

void CheckVector(const ParameterSet& set, const VectorXd& b) {
  Require(b.size() == set.k(), ErrorCode::kDimensionMismatch,
          "basis vector has the wrong size for this set");
  Require(b.allFinite(), ErrorCode::kNonFinite, "basis vector is not finite");
}

void CheckDirection(const ParameterSet& set, const VectorXd& c) {
  Require(c.size() == set.m(), ErrorCode::kDimensionMismatch,
          "direction has the wrong size for this set");
  Require(c.allFinite(), ErrorCode::kNonFinite, "direction is not finite");
}

// Doubles the distance above `lo` until feasible(hi) holds.
std::optional<double> ExpandUpper(double lo,
                                  const std::function<bool(double)>& feasible) {
  double step = 1.0 + std::abs(lo);
  for (int i = 0; i < 80; ++i) {
    if (feasible(lo + step)) return lo + step;
    step *= 2.0;
  }
  return std::nullopt;
}

}  // namespace

const char* BoundRouteName(BoundRoute route) {
  switch (route) {
    case BoundRoute::kClosedForm: return "closed_form";
    case BoundRoute::kLmi: return "lmi";
    case BoundRoute::kRelaxed: return "relaxed";
    case BoundRoute::kVertex: return "vertex";
    case BoundRoute::kCovering: return "covering";
  }
  return "unknown";
}

BoundResult LinearBound(const ParameterSet& set, const VectorXd& b,
                        const VectorXd& c) {
  CheckVector(set, b);
  CheckDirection(set, c);
  BoundResult result;
  result.route = BoundRoute::kClosedForm;
  if (c.squaredNorm() == 0.0) {
    result.value = 0.0;
    return result;
  }
  if (!set.compact() && !InRange(set.n().m22(), b)) {
    result.value = kInf;
    return result;
  }
  const MatrixXd& k = set.neg_n22_pinv();
  const double lin = c.dot(set.n().m12() * (k * b));
  const double sc = std::max(0.0, c.dot(set.schur() * c));
  const double sb = std::max(0.0, b.dot(k * b));
  result.value = lin + std::sqrt(sc * sb);
  if (set.compact()) {
    const EllipsoidalForm form = set.ellipsoid();
    const VectorXd p = form.right * c;
    const VectorXd q = form.left * b;
    MatrixXd v = MatrixXd::Zero(set.k(), set.m());
    if (p.norm() > 0.0 && q.norm() > 0.0) {
      v = q * p.transpose() / (q.norm() * p.norm());
    }
    result.maximizer = form.Map(v);
  }
  return result;
}

BoundResult LinearBound(const ParameterSet& set, const BasisSet& basis,
                        const VectorXd& z, const VectorXd& c) {
  return LinearBound(set, basis.Evaluate(z), c);
}

BoundResult LinearBoundLmi(const ParameterSet& set, const VectorXd& b,
                           const VectorXd& c, const BoundOptions& options) {
  CheckVector(set, b);
  CheckDirection(set, c);
  const MatrixXd& schur = set.schur();
  const double sc = c.dot(schur * c);
  Require(sc > RelativeTolerance() * (1.0 + SpectralNorm(schur)) * c.squaredNorm(),
          ErrorCode::kHypothesisViolated,
          "the scalar LMI route needs c^T (N|N22) c > 0");
  BoundResult result;
  result.route = BoundRoute::kLmi;
  const auto reduced = ReduceToRange(set, b);
  if (!reduced) {
    result.value = kInf;
    return result;
  }
  const ParameterSet& work = reduced->set;
  const VectorXd& bw = reduced->b;
  const int k = work.k();

  const PartitionedSymmetric& n = work.n();
  MatrixXd nc(1 + k, 1 + k);
  const VectorXd n21c = n.m21() * c;
  nc(0, 0) = c.dot(n.m11() * c);
  nc.block(0, 1, 1, k) = n21c.transpose();
  nc.block(1, 0, k, 1) = n21c;
  nc.bottomRightCorner(k, k) = n.m22();

  AffineLmi lmi;
  lmi.constant = MatrixXd::Zero(1 + k, 1 + k);
  lmi.constant.block(0, 1, 1, k) = -bw.transpose();
  lmi.constant.block(1, 0, k, 1) = -bw;
  lmi.terms = {-Symmetrize(nc)};
  lmi.lower = VectorXd::Zero(1);
  lmi.upper = VectorXd::Constant(1, options.multiplier_upper);

  VectorXd last;
  double last_alpha = 0.0;
  auto feasible = [&](double delta) {
    lmi.constant(0, 0) = 2.0 * delta;
    LmiOptions lo;
    lo.warm_start = last;
    lo.strict = true;
    const LmiResult r = SolveAffineLmi(lmi, lo);
    if (r.feasible) {
      last = r.witness;
      last_alpha = r.witness(0);
    }
    return r.feasible;
  };

  const double lower = c.dot(work.center().transpose() * bw);
  const auto upper = ExpandUpper(lower, feasible);
  if (!upper) {
    result.value = kInf;
    return result;
  }
  double alpha = last_alpha;
  const double value = BisectSmallestFeasible(
      lower, *upper,
      [&](double d) {
        const bool ok = feasible(d);
        if (ok) alpha = last_alpha;
        return ok;
      },
      options.max_bisections);
  result.value = value;
  result.multiplier = alpha;
  return result;
}

VectorXd LseValue(const ParameterSet& set, const VectorXd& b) {
  CheckVector(set, b);
  return set.lse().transpose() * b;
}

double Uncertainty(const ParameterSet& set, const VectorXd& b) {
  CheckVector(set, b);
  if (b.squaredNorm() == 0.0) return 0.0;
  if (!set.compact() && !InRange(set.n().m22(), b)) return kInf;
  const double lam = std::max(0.0, MaxEigenvalue(set.schur()));
  const double sb = std::max(0.0, b.dot(set.neg_n22_pinv() * b));
  return std::sqrt(lam * sb);
}

double DirectionalUncertainty(const ParameterSet& set, const VectorXd& b,
                              const VectorXd& c) {
  CheckVector(set, b);
  CheckDirection(set, c);
  if (b.squaredNorm() == 0.0 || c.squaredNorm() == 0.0) return 0.0;
  if (!set.compact() && !InRange(set.n().m22(), b)) return kInf;
  const double sc = std::max(0.0, c.dot(set.schur() * c));
  const double sb = std::max(0.0, b.dot(set.neg_n22_pinv() * b));
  return std::sqrt(sc * sb);
}

double NormBoundUpperEstimate(const ParameterSet& set, const VectorXd& b) {
  CheckVector(set, b);
  Require(set.compact() || InRange(set.n().m22(), b), ErrorCode::kNotInRange,
          "basis vector is outside the range of the regressors");
  return (set.center().transpose() * b).norm() + Uncertainty(set, b);
}

BoundResult NormBound(const ParameterSet& set, const VectorXd& b,
                      const BoundOptions& options) {
  CheckVector(set, b);
  BoundResult result;
  result.route = BoundRoute::kClosedForm;
  if (b.squaredNorm() == 0.0) {
    result.value = 0.0;
    return result;
  }
  const auto reduced = ReduceToRange(set, b);
  if (!reduced) {
    result.value = kInf;
    return result;
  }
  const ParameterSet& work = reduced->set;
  const VectorXd& bw = reduced->b;
  const int m = work.m();
  const int k = work.k();
  const MatrixXd& nfull = work.n().full();
  result.route =
      MaxEigenvalue(nfull) > PsdTolerance(nfull) ? BoundRoute::kLmi
                                                 : BoundRoute::kRelaxed;

  const double lower = (work.center().transpose() * bw).norm();
  const double upper = NormBoundUpperEstimate(work, bw);
  if (!(upper > lower)) {
    result.value = upper;
    return result;
  }

  const int d = m + k + 1;
  AffineLmi lmi;
  lmi.constant = MatrixXd::Zero(d, d);
  lmi.constant.block(m, m + k, k, 1) = bw;
  lmi.constant.block(m + k, m, 1, k) = bw.transpose();
  lmi.constant(m + k, m + k) = 1.0;
  MatrixXd term = MatrixXd::Zero(d, d);
  term.topLeftCorner(m + k, m + k) = -nfull;
  lmi.terms = {term};
  lmi.lower = VectorXd::Zero(1);
  lmi.upper = VectorXd::Constant(1, options.multiplier_upper);

  VectorXd last;
  std::optional<double> alpha;
  auto feasible = [&](double d2) {
    lmi.constant.topLeftCorner(m, m) = d2 * MatrixXd::Identity(m, m);
    LmiOptions lo;
    lo.warm_start = last;
    lo.strict = true;
    const LmiResult r = SolveAffineLmi(lmi, lo);
    if (r.feasible) {
      last = r.witness;
      alpha = r.witness(0);
    }
    return r.feasible;
  };
  const double d2 = BisectSmallestFeasible(lower * lower, upper * upper,
                                           feasible, options.max_bisections);
  result.value = std::sqrt(d2);
  result.multiplier = alpha;
  return result;
}

BoundResult NormBound(const ParameterSet& set, const BasisSet& basis,
                      const VectorXd& z, const BoundOptions& options) {
  return NormBound(set, basis.Evaluate(z), options);
}

ParameterSet LambdaInflate(const ParameterSet& set, double lambda) {
  Require(std::isfinite(lambda) && lambda >= 0.0, ErrorCode::kNegativeLambda,
          "inflation parameter must be nonnegative");
  MatrixXd full = set.n().full();
  full.topLeftCorner(set.m(), set.m()) += lambda * (2.0 + lambda) * set.schur();
  return ParameterSet(PartitionedSymmetric(full, set.m()), set.regressors());
}

BoundResult GlobalNormBound(const ParameterSet& set, const MatrixXd& m_bound,
                            const BoundOptions& options) {
  const int m = set.m();
  const int k = set.k();
  Require(m_bound.rows() == k && m_bound.cols() == k,
          ErrorCode::kDimensionMismatch, "basis bound must be k x k");
  Require(IsSymmetric(m_bound) && IsPsd(m_bound), ErrorCode::kNotPositiveDefinite,
          "basis bound must be symmetric PSD");
  AffineLmi lmi;
  lmi.constant = MatrixXd::Zero(m + k, m + k);
  lmi.constant.bottomRightCorner(k, k) = -Symmetrize(m_bound);
  lmi.terms = {-set.n().full()};
  lmi.lower = VectorXd::Zero(1);
  lmi.upper = VectorXd::Constant(1, options.multiplier_upper);
  BoundResult result;
  result.route = BoundRoute::kLmi;
  VectorXd last;
  auto feasible = [&](double d2) {
    lmi.constant.topLeftCorner(m, m) = d2 * MatrixXd::Identity(m, m);
    LmiOptions lo;
    lo.warm_start = last;
    lo.strict = true;
    const LmiResult r = SolveAffineLmi(lmi, lo);
    if (r.feasible) {
      last = r.witness;
      result.multiplier = r.witness(0);
    }
    return r.feasible;
  };
  if (feasible(0.0)) {
    result.value = 0.0;
    return result;
  }
  const auto upper = ExpandUpper(0.0, feasible);
  if (!upper) {
    result.value = kInf;
    return result;
  }
  result.value =
      std::sqrt(BisectSmallestFeasible(0.0, *upper, feasible, options.max_bisections));
  return result;
}

double EvaluateBound(const ParameterSet& set, const VectorXd& b,
                     const std::optional<VectorXd>& c) {
  if (c) return LinearBound(set, b, *c).value;
  return NormBound(set, b).value;
}

VertexBound VertexMaxBound(const ParameterSet& set, const BasisSet& basis,
                           const MatrixXd& vertices,
                           const std::optional<VectorXd>& c,
                           bool convexity_certified) {
  Require(vertices.cols() >= 1, ErrorCode::kEmptyVertexSet, "no vertices given");
  VertexBound out;
  out.value = -kInf;
  out.premise_certified = convexity_certified;
  for (Eigen::Index i = 0; i < vertices.cols(); ++i) {
    const double v = EvaluateBound(set, basis.Evaluate(vertices.col(i)), c);
    if (v > out.value) {
      out.value = v;
      out.argmax = static_cast<int>(i);
    }
  }
  return out;
}

CoveringGrid MakeCovering(const Box& box, double epsilon) {
  Require(epsilon > 0.0 && std::isfinite(epsilon), ErrorCode::kNonPositiveEpsilon,
          "covering radius must be positive");
  const Box b = MakeBox(box.lower, box.upper);
  const int n = b.dim();
  const double h = 2.0 * epsilon / std::sqrt(static_cast<double>(n));
  std::vector<int> counts(static_cast<size_t>(n));
  double total = 1.0;
  for (int i = 0; i < n; ++i) {
    const double width = b.upper(i) - b.lower(i);
    counts[static_cast<size_t>(i)] =
        width > 0.0 ? static_cast<int>(std::ceil(width / h - 1e-12)) + 1 : 1;
    total *= counts[static_cast<size_t>(i)];
  }
  Require(total <= 1e7, ErrorCode::kInvalidArgument,
          "covering would need more than 1e7 points");
  CoveringGrid grid;
  grid.epsilon = epsilon;
  grid.target = b;
  grid.points.resize(n, static_cast<Eigen::Index>(total));
  std::vector<int> idx(static_cast<size_t>(n), 0);
  for (Eigen::Index col = 0; col < grid.points.cols(); ++col) {
    for (int i = 0; i < n; ++i) {
      const int ci = counts[static_cast<size_t>(i)];
      const double frac = ci > 1 ? static_cast<double>(idx[static_cast<size_t>(i)]) / (ci - 1) : 0.5;
      grid.points(i, col) = b.lower(i) + frac * (b.upper(i) - b.lower(i));
    }
    for (int i = 0; i < n; ++i) {
      if (++idx[static_cast<size_t>(i)] < counts[static_cast<size_t>(i)]) break;
      idx[static_cast<size_t>(i)] = 0;
    }
  }
  return grid;
}

Interval CoveringBounds(const ParameterSet& set, const BasisSet& basis,
                        const CoveringGrid& grid, double lipschitz,
                        const std::optional<VectorXd>& c) {
  Require(grid.points.cols() >= 1, ErrorCode::kEmptyGrid, "empty covering grid");
  Require(lipschitz >= 0.0, ErrorCode::kInvalidArgument,
          "Lipschitz constant must be nonnegative");
  double lo = kInf, hi = -kInf;
  for (Eigen::Index i = 0; i < grid.points.cols(); ++i) {
    const double v = EvaluateBound(set, basis.Evaluate(grid.points.col(i)), c);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return Interval{lo - grid.epsilon * lipschitz, hi + grid.epsilon * lipschitz};
}

}  // namespace cautious
