#include "cautious/online.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cautious/bounds.h"
#include "cautious/error.h"
#include "cautious/lmi.h"

namespace cautious {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// The exact route works on concave quadratic constraints
//   f_i(d) = a_i + 2 g_i^T d - d^T H_i d >= 0
// with log-barrier Newton steps. The reported suprema come from the
// Lagrangian dual at the barrier multipliers, so they are upper bounds
// whatever the state of the primal iteration.
struct Quadratics {
  const std::vector<double>& a;
  const std::vector<VectorXd>& g;
  const std::vector<MatrixXd>& h;
  // Scratch for H_i d, so the inner loops do not allocate.
  mutable VectorXd hd;

  Quadratics(const std::vector<double>& a_in, const std::vector<VectorXd>& g_in,
             const std::vector<MatrixXd>& h_in)
      : a(a_in), g(g_in), h(h_in), hd(g_in.empty() ? 0 : g_in.front().size()) {}

  int count() const { return static_cast<int>(a.size()); }
  double Value(int i, const VectorXd& d) const {
    hd.noalias() = h[i] * d;
    return a[i] + 2.0 * g[i].dot(d) - d.dot(hd);
  }
  // f_i(d), with its gradient written to `grad`.
  double ValueAndGradient(int i, const VectorXd& d, VectorXd& grad) const {
    hd.noalias() = h[i] * d;
    grad = 2.0 * (g[i] - hd);
    return a[i] + 2.0 * g[i].dot(d) - d.dot(hd);
  }
  VectorXd Gradient(int i, const VectorXd& d) const {
    return 2.0 * (g[i] - h[i] * d);
  }
  double MinValue(const VectorXd& d) const {
    double v = kInf;
    for (int i = 0; i < count(); ++i) v = std::min(v, Value(i, d));
    return v;
  }
};

// The barrier is self-concordant, so the damped Newton step 1 / (1 + lambda)
// stays feasible and decreases the objective without a line search on values
// (which lose all resolution once t is large). Feasibility is still checked.
bool Feasible(const Quadratics& q, const VectorXd& d) {
  for (int i = 0; i < q.count(); ++i) {
    if (!(q.Value(i, d) > 0.0)) return false;
  }
  return true;
}

// Minimizes -t b^T d - sum log f_i(d) from a strictly feasible d.
void Centre(const Quadratics& q, double t, const VectorXd& b, VectorXd& d) {
  const int k = static_cast<int>(d.size());
  VectorXd grad(k), df(k), step(k), trial(k);
  MatrixXd hess(k, k);
  Eigen::LDLT<MatrixXd> ldlt(k);
  for (int iter = 0; iter < 100; ++iter) {
    grad = -t * b;
    hess.setZero();
    for (int i = 0; i < q.count(); ++i) {
      const double f = q.ValueAndGradient(i, d, df);
      grad -= df / f;
      hess.noalias() += (df / (f * f)) * df.transpose();
      hess += (2.0 / f) * q.h[i];
    }
    ldlt.compute(hess);
    step = ldlt.solve(-grad);
    const double decrement = -grad.dot(step);
    if (!std::isfinite(decrement) || decrement <= 1e-12) return;
    const double lambda = std::sqrt(decrement);
    double s = lambda > 0.25 ? 1.0 / (1.0 + lambda) : 1.0;
    trial = d + s * step;
    while (!Feasible(q, trial) && s > 1e-12) {
      s *= 0.5;
      trial = d + s * step;
    }
    if (s <= 1e-12) return;
    d = trial;
    if (decrement <= 1e-9) return;
  }
}

// Lagrangian dual of sup b^T d at multipliers mu >= 0.
double DualValue(const Quadratics& q, const VectorXd& mu, const VectorXd& b) {
  const int k = static_cast<int>(b.size());
  MatrixXd hmu = MatrixXd::Zero(k, k);
  VectorXd v = b;
  double base = 0.0;
  for (int i = 0; i < q.count(); ++i) {
    hmu += mu(i) * q.h[i];
    v += 2.0 * mu(i) * q.g[i];
    base += mu(i) * q.a[i];
  }
  const Eigen::LLT<MatrixXd> llt(Symmetrize(hmu));
  if (llt.info() != Eigen::Success) return kInf;
  const double value = base + 0.25 * v.dot(llt.solve(v));
  return std::isfinite(value) ? value : kInf;
}

// Every mu >= 0 with a positive definite sum mu_i h_i gives a valid upper
// bound, so the barrier multipliers can be improved freely. Damped Newton
// steps on the multipliers that are not negligible; the dual is convex in mu
// with gradient f_i(d*) and Hessian grad f_i^T (2 H)^{-1} grad f_j at the
// inner maximizer d* = H^{-1} v / 2. Returns the smallest value seen.
double PolishDual(const Quadratics& q, VectorXd mu, const VectorXd& b, double value) {
  const int k = static_cast<int>(b.size());
  const double floor = 1e-10 * mu.maxCoeff();
  std::vector<int> active;
  for (int i = 0; i < q.count(); ++i) {
    if (mu(i) > floor) active.push_back(i);
  }
  const int a = static_cast<int>(active.size());
  if (a == 0) return value;
  double damping = 1e-12;
  for (int iter = 0; iter < 50; ++iter) {
    MatrixXd hmu = MatrixXd::Zero(k, k);
    VectorXd v = b;
    for (int i : active) {
      hmu += mu(i) * q.h[i];
      v += 2.0 * mu(i) * q.g[i];
    }
    const Eigen::LLT<MatrixXd> llt(Symmetrize(hmu));
    if (llt.info() != Eigen::Success) break;
    const VectorXd d = 0.5 * llt.solve(v);
    MatrixXd grads(k, a);
    VectorXd grad(a);
    for (int j = 0; j < a; ++j) {
      grad(j) = q.Value(active[j], d);
      grads.col(j) = q.Gradient(active[j], d);
    }
    const MatrixXd hess = 0.5 * grads.transpose() * llt.solve(grads);
    // Multipliers at zero with a positive gradient stay fixed.
    std::vector<int> free;
    for (int j = 0; j < a; ++j) {
      if (mu(active[j]) > 0.0 || grad(j) < 0.0) free.push_back(j);
    }
    if (free.empty()) break;
    const int f = static_cast<int>(free.size());
    MatrixXd hf(f, f);
    VectorXd gf(f);
    for (int r = 0; r < f; ++r) {
      gf(r) = grad(free[r]);
      for (int c = 0; c < f; ++c) hf(r, c) = hess(free[r], free[c]);
    }
    // Levenberg-Marquardt damping: the Hessian has rank at most k while
    // many multipliers can be active.
    const double scale = hf.diagonal().cwiseAbs().maxCoeff() + 1e-300;
    bool improved = false;
    for (; damping < 1e6; damping *= 10.0) {
      const VectorXd step =
          (hf + damping * scale * MatrixXd::Identity(f, f)).ldlt().solve(-gf);
      if (!step.allFinite()) continue;
      VectorXd trial = mu;
      for (int r = 0; r < f; ++r) {
        const int i = active[free[r]];
        trial(i) = std::max(0.0, mu(i) + step(r));
      }
      const double tv = DualValue(q, trial, b);
      if (tv < value) {
        value = tv;
        mu = trial;
        improved = true;
        damping = std::max(1e-14, damping * 0.1);
        break;
      }
    }
    if (!improved) break;
  }
  return value;
}

// Searches for d with every f_i(d) > 0 by pushing up s subject to
// f_i(d) >= s. Returns false when the supremum of min_i f_i is not
// positive within the solver resolution.
bool PhaseOne(const Quadratics& q, VectorXd& d, double scale) {
  const int k = static_cast<int>(d.size());
  double s = q.MinValue(d);
  if (s > 0.0) return true;
  s -= std::max(std::abs(s), scale);
  const int count = q.count();
  auto feasible = [&](const VectorXd& x, double sv) {
    for (int i = 0; i < count; ++i) {
      if (!(q.Value(i, x) - sv > 0.0)) return false;
    }
    return true;
  };
  for (double t = 1.0 / scale; t < 1e14 / scale; t *= 10.0) {
    for (int iter = 0; iter < 100; ++iter) {
      VectorXd grad = VectorXd::Zero(k + 1);
      MatrixXd hess = MatrixXd::Zero(k + 1, k + 1);
      grad(k) = -t;
      for (int i = 0; i < count; ++i) {
        const double slack = q.Value(i, d) - s;
        VectorXd dh(k + 1);
        dh.head(k) = q.Gradient(i, d);
        dh(k) = -1.0;
        grad -= dh / slack;
        hess.noalias() += dh * dh.transpose() / (slack * slack);
        hess.topLeftCorner(k, k) += 2.0 * q.h[i] / slack;
      }
      const VectorXd step = Eigen::LDLT<MatrixXd>(hess).solve(-grad);
      const double decrement = -grad.dot(step);
      if (!std::isfinite(decrement) || decrement <= 1e-12) break;
      const double lambda = std::sqrt(decrement);
      double a = lambda > 0.25 ? 1.0 / (1.0 + lambda) : 1.0;
      while (!feasible(d + a * step.head(k), s + a * step(k)) && a > 1e-12) a *= 0.5;
      if (a <= 1e-12) break;
      d += a * step.head(k);
      s += a * step(k);
      if (q.MinValue(d) > 0.0) return true;
      if (decrement <= 1e-9) break;
    }
    // The barrier optimum is within count / t of max min_i f_i.
    if (s + count / t <= 0.0) return false;
  }
  return q.MinValue(d) > 0.0;
}

double DegeneracyScale(const ParameterSet& set) {
  return 1e-12 * (1.0 + set.n().full().cwiseAbs().maxCoeff());
}

bool EligibleForExact(const ParameterSet& set) {
  return set.m() == 1 && set.schur()(0, 0) > DegeneracyScale(set) &&
         IsPsd(-set.n().m22());
}

}  // namespace

std::vector<MatrixXd> UniformNoiseSample(const PartitionedSymmetric& pi, int count,
                                         std::uint64_t seed) {
  Require(IsNegativeDefinite(pi.m22()), ErrorCode::kUnboundedNoiseSet,
          "uniform noise needs Pi22 < 0");
  ValidateNoiseModel(pi);
  std::vector<MatrixXd> out;
  out.reserve(count);
  for (const MatrixXd& member : SampleQmiSet(pi, count, SampleMode::kUniform, seed)) {
    Require(QmiMembership(pi, member).member, ErrorCode::kSamplingFailure,
            "uniform draw left the noise set");
    out.push_back(member.transpose());
  }
  return out;
}

const char* NoiseModeName(NoiseMode mode) {
  switch (mode) {
    case NoiseMode::kUniform: return "uniform";
    case NoiseMode::kBoundary: return "boundary";
    case NoiseMode::kZero: return "zero";
  }
  return "?";
}

MeasurementOracle::MeasurementOracle(MatrixXd theta_hat, BasisSet basis,
                                     PartitionedSymmetric pi, NoiseMode mode,
                                     std::uint64_t seed)
    : theta_hat_(std::move(theta_hat)),
      basis_(std::move(basis)),
      pi_(std::move(pi)),
      mode_(mode),
      rng_(seed) {
  Require(theta_hat_.rows() == basis_.size() && theta_hat_.cols() == pi_.u(),
          ErrorCode::kDimensionMismatch, "theta_hat must be k x m");
  Require(IsNegativeDefinite(pi_.m22()), ErrorCode::kUnboundedNoiseSet,
          "the oracle noise set must be bounded");
  ValidateNoiseModel(pi_);
}

Dataset MeasurementOracle::Measure(const MatrixXd& points) {
  Require(points.rows() == basis_.input_dim() && points.cols() == pi_.v(),
          ErrorCode::kDimensionMismatch, "oracle points must be n x T");
  const int m = pi_.u();
  const int t = pi_.v();
  MatrixXd w = MatrixXd::Zero(m, t);
  if (mode_ != NoiseMode::kZero) {
    const SampleMode sample =
        mode_ == NoiseMode::kUniform ? SampleMode::kUniform : SampleMode::kBoundary;
    w = SampleQmiSet(pi_, 1, sample, rng_()).front().transpose();
  }
  const MembershipResult check = QmiMembership(pi_, w.transpose());
  Require(check.member, ErrorCode::kOracleFailure,
          "noise draw is outside Z(Pi), min eigenvalue " +
              std::to_string(check.min_eigenvalue));
  Dataset data{points, theta_hat_.transpose() * basis_.EvaluateColumns(points) + w};
  Require(AllFinite(data.values), ErrorCode::kOracleFailure, "non-finite measurement");
  return data;
}

LocalPattern MakeLocalPattern(const MatrixXd& offsets) {
  const int n = static_cast<int>(offsets.rows());
  const int t = static_cast<int>(offsets.cols());
  Require(n >= 1 && t >= n + 1, ErrorCode::kInvalidPattern,
          "a pattern in R^n needs at least n + 1 offsets");
  Require(AllFinite(offsets), ErrorCode::kInvalidPattern, "non-finite offset");
  MatrixXd augmented(n + 1, t);
  augmented.topRows(n) = offsets;
  augmented.row(n).setOnes();
  const Eigen::JacobiSVD<MatrixXd> svd(augmented, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VectorXd& sv = svd.singularValues();
  Require(sv(n) > 1e-10 * sv(0), ErrorCode::kInvalidPattern,
          "offsets do not span R^n affinely");

  // lambda = lambda0 + N mu parameterizes the affine weights with F lambda = 0
  // and sum lambda = 1; the margin is max over mu of min_i lambda_i.
  VectorXd rhs = VectorXd::Zero(n + 1);
  rhs(n) = 1.0;
  const VectorXd lambda0 = svd.solve(rhs);
  const MatrixXd null = svd.matrixV().rightCols(t - n - 1);
  double margin = lambda0.minCoeff();
  if (null.cols() > 0) {
    AffineLmi lmi;
    lmi.constant = lambda0.asDiagonal();
    for (int j = 0; j < null.cols(); ++j) {
      lmi.terms.push_back(null.col(j).asDiagonal());
    }
    // Weights with min >= 0 lie in the simplex, so ||N mu|| <= 2.
    lmi.lower = VectorXd::Constant(null.cols(), -2.0);
    lmi.upper = VectorXd::Constant(null.cols(), 2.0);
    LmiOptions options;
    options.maximize = true;
    margin = std::max(margin, SolveAffineLmi(lmi, options).min_eigenvalue);
  }
  Require(margin > 1e-9, ErrorCode::kInvalidPattern,
          "the origin is not interior to the convex hull of the offsets");
  return LocalPattern{offsets, margin};
}

LocalPattern DefaultLocalPattern(int n, double radius, int center_copies) {
  Require(n >= 1 && radius > 0.0 && center_copies >= 0, ErrorCode::kInvalidArgument,
          "pattern needs n >= 1, radius > 0 and center_copies >= 0");
  MatrixXd offsets = MatrixXd::Zero(n, 2 * n + center_copies);
  for (int i = 0; i < n; ++i) {
    offsets(i, 2 * i) = -radius;
    offsets(i, 2 * i + 1) = radius;
  }
  return MakeLocalPattern(offsets);
}

double PatternExcitation(const LocalPattern& pattern, const BasisSet& basis,
                         const VectorXd& z) {
  const MatrixXd phi =
      basis.EvaluateColumns(pattern.offsets.colwise() + z);
  if (phi.cols() < phi.rows()) return 0.0;
  return Eigen::JacobiSVD<MatrixXd>(phi).singularValues()(phi.rows() - 1);
}

const char* IntersectionRouteName(IntersectionRoute route) {
  return route == IntersectionRoute::kExact ? "exact" : "n_sum";
}

ConsistentSet::ConsistentSet(const ParameterSet& initial)
    : route_(EligibleForExact(initial) && initial.compact() ? IntersectionRoute::kExact
                                                            : IntersectionRoute::kNSum),
      rounds_{initial},
      outer_(initial) {
  if (route_ == IntersectionRoute::kExact) {
    reference_ = initial.center().col(0);
    interior_ = VectorXd::Zero(initial.k());
    AddConstraint(initial);
    if (Recentre()) {
      Prune();
    } else {
      route_ = IntersectionRoute::kNSum;
    }
  }
}

void ConsistentSet::AddConstraint(const ParameterSet& round) {
  const MatrixXd h = -round.n().m22();
  const VectorXd g = round.n().m21().col(0);
  a_.push_back(QmiValue(round.n(), reference_)(0, 0));
  g_.push_back(g - h * reference_);
  h_.push_back(h);
  h_norm_.push_back(SpectralNorm(h));
}

// A constraint that is strictly positive on a ball around the set is
// inactive on the set; by convexity removing it cannot enlarge the set
// (a point outside it would connect to the set through f_i = 0).
void ConsistentSet::Prune() {
  ball_ = Ball{VectorXd::Zero(k()), kInf};
  const Ball fresh = BoundingBall();
  ball_ = Ball{fresh.center - reference_, fresh.radius};
  const Quadratics q{a_, g_, h_};
  const double r = ball_.radius;
  size_t kept = 0;
  for (size_t i = 0; i < a_.size(); ++i) {
    const VectorXd c = ball_.center.col(0);
    const double worst = q.Value(static_cast<int>(i), c) -
                         q.Gradient(static_cast<int>(i), c).norm() * r - h_norm_[i] * r * r;
    const bool redundant = worst > 1e-9 * (std::abs(a_[i]) + 1e-300);
    if (redundant && a_.size() - (i - kept) > 1) continue;
    a_[kept] = a_[i];
    g_[kept] = g_[i];
    h_[kept] = h_[i];
    h_norm_[kept] = h_norm_[i];
    ++kept;
  }
  a_.resize(kept);
  g_.resize(kept);
  h_.resize(kept);
  h_norm_.resize(kept);
}

bool ConsistentSet::Recentre() {
  const Quadratics q{a_, g_, h_};
  double scale = 0.0;
  for (double a : a_) scale = std::max(scale, std::abs(a));
  scale = std::max(scale, 1e-300);
  VectorXd d = interior_;
  if (!PhaseOne(q, d, scale)) return false;
  Centre(q, 1.0, VectorXd::Zero(d.size()), d);
  interior_ = d;
  return q.MinValue(d) > 0.0;
}

void ConsistentSet::Add(const ParameterSet& round) {
  Require(round.m() == m() && round.k() == k(), ErrorCode::kDimensionMismatch,
          "rounds must share (m, k)");
  rounds_.push_back(round);
  outer_ = CombineDatasets({outer_, round});
  if (route_ != IntersectionRoute::kExact) return;
  if (!EligibleForExact(round)) {
    route_ = IntersectionRoute::kNSum;
    return;
  }
  AddConstraint(round);
  if (Recentre()) {
    Prune();
  } else {
    route_ = IntersectionRoute::kNSum;
  }
}

ConsistentSet::Support ConsistentSet::Sup(const VectorXd& b) const {
  const Quadratics q{a_, g_, h_};
  const double offset = b.dot(reference_);
  const double width =
      2.0 * DirectionalUncertainty(outer_, b, VectorXd::Ones(1)) + 1e-300;
  const double count = q.count();
  VectorXd d = interior_;
  Support best{kInf, d};
  VectorXd mu(q.count()), best_mu;
  // The dual bottoms out near 1e-9 relative in double precision, so the
  // path stops at 1e-8 or as soon as the dual no longer improves.
  const double tol = 1e-8 * (std::abs(b.dot(d)) + width);
  for (double t = count / width; t < 1e13 * count / width; t *= 20.0) {
    Centre(q, t, b, d);
    for (int i = 0; i < q.count(); ++i) mu(i) = 1.0 / (t * q.Value(i, d));
    const double dual = DualValue(q, mu, b);
    const double primal = b.dot(d);
    if (dual >= best.value && best.value - primal <= 1e3 * tol) break;
    if (dual < best.value) {
      best = {dual, d};
      best_mu = mu;
    }
    if (best.value - primal <= tol) break;
  }
  // Only paths that stalled before reaching the tolerance need the polish.
  if (best_mu.size() > 0 && best.value - b.dot(d) > tol) {
    best.value = PolishDual(q, best_mu, b, best.value);
  }
  best.value += offset;
  best.theta = reference_ + d;
  return best;
}

double ConsistentSet::Upper(const VectorXd& b, const VectorXd& c) const {
  Require(b.size() == k() && c.size() == m(), ErrorCode::kDimensionMismatch,
          "b must have k entries and c m entries");
  const double closed = LinearBound(outer_, b, c).value;
  if (route_ == IntersectionRoute::kNSum) return closed;
  return std::min(closed, Sup(c(0) * b).value);
}

double ConsistentSet::Lower(const VectorXd& b, const VectorXd& c) const {
  return -Upper(b, -c);
}

double ConsistentSet::Uncertainty(const VectorXd& b, const VectorXd& c) const {
  return 0.5 * (Upper(b, c) - Lower(b, c));
}

MatrixXd ConsistentSet::Maximizer(const MatrixXd& direction) const {
  Require(direction.rows() == k() && direction.cols() == m(),
          ErrorCode::kDimensionMismatch, "direction must be k x m");
  if (route_ == IntersectionRoute::kExact) return Sup(direction.col(0)).theta;
  // <D, C + L V R> is maximal at the polar factor of L^T D R^T.
  const EllipsoidalForm form = outer_.ellipsoid();
  const Eigen::JacobiSVD<MatrixXd> svd(form.left.transpose() * direction *
                                           form.right.transpose(),
                                       Eigen::ComputeFullU | Eigen::ComputeFullV);
  return form.Map(svd.matrixU() * svd.matrixV().transpose());
}

ConsistentSet::Ball ConsistentSet::BoundingBall() const {
  Require(outer_.compact(), ErrorCode::kNotCompact, "the consistent set is unbounded");
  if (route_ == IntersectionRoute::kNSum) {
    const EllipsoidalForm form = outer_.ellipsoid();
    return Ball{form.center, SpectralNorm(form.left) * form.right.norm()};
  }
  if (std::isfinite(ball_.radius)) return Ball{ball_.center.colwise() + reference_, ball_.radius};
  const Eigen::SelfAdjointEigenSolver<MatrixXd> axes(-outer_.n().m22());
  VectorXd center = VectorXd::Zero(k());
  double radius2 = 0.0;
  for (int j = 0; j < k(); ++j) {
    const VectorXd e = axes.eigenvectors().col(j);
    const double hi = Sup(e).value;
    const double lo = -Sup(-e).value;
    center += 0.5 * (hi + lo) * e;
    radius2 += 0.25 * (hi - lo) * (hi - lo);
  }
  return Ball{center, std::sqrt(radius2)};
}

bool ConsistentSet::Contains(const MatrixXd& theta, double slack) const {
  Require(theta.rows() == k() && theta.cols() == m(), ErrorCode::kDimensionMismatch,
          "theta must be k x m");
  if (route_ == IntersectionRoute::kNSum) {
    return MinEigenvalue(QmiValue(outer_.n(), theta)) >= -slack;
  }
  const Quadratics q{a_, g_, h_};
  const VectorXd d = theta.col(0) - reference_;
  for (int i = 0; i < q.count(); ++i) {
    if (q.Value(i, d) < -slack * (1.0 + std::abs(a_[i]))) return false;
  }
  return true;
}

namespace {

// Cell centres of a regular grid with `cells` cells per axis.
std::vector<VectorXd> GridCentres(const Box& box, int cells) {
  const int n = box.dim();
  const VectorXd width = (box.upper - box.lower) / cells;
  std::vector<VectorXd> out;
  std::vector<int> index(n, 0);
  while (true) {
    VectorXd z(n);
    for (int j = 0; j < n; ++j) z(j) = box.lower(j) + (index[j] + 0.5) * width(j);
    out.push_back(z);
    int j = 0;
    while (j < n && ++index[j] == cells) index[j++] = 0;
    if (j == n) break;
  }
  return out;
}

}  // namespace

StoppingGap ComputeStoppingGap(const ConsistentSet& set, const BasisSet& basis,
                               const Box& domain, const VectorXd& c, int cells,
                               std::optional<double> jacobian_bound) {
  Require(domain.dim() == basis.input_dim(), ErrorCode::kDimensionMismatch,
          "domain and basis dimensions differ");
  Require(cells >= 1, ErrorCode::kEmptyGrid, "the gap grid needs at least one cell");
  if (!jacobian_bound) jacobian_bound = basis.metadata().jacobian_norm_bound;
  Require(jacobian_bound.has_value(), ErrorCode::kMissingMetadata,
          "stopping gap needs a bound on the basis Jacobian");
  const double jac = *jacobian_bound;
  const ConsistentSet::Ball ball = set.BoundingBall();

  // For z in the cell around z_i and theta in the set, split
  //   c^T theta^T b(z) = c^T C^T b(z) + c^T (theta - C)^T b(z).
  // The first part is a known function minimized on a fine subgrid; the
  // second changes by at most |c| R J h from its value at z_i.
  const int n = domain.dim();
  const int sub = n == 1 ? 1024 : (n == 2 ? 8 : 3);
  const VectorXd cell_width = (domain.upper - domain.lower) / cells;
  const double half_cell = 0.5 * cell_width.norm();
  const double half_sub = half_cell / sub;
  const VectorXd known = ball.center * c;
  const double slack_known = known.norm() * jac * half_sub;
  const double slack_set = c.norm() * ball.radius * jac * half_cell;

  StoppingGap out;
  out.upper = kInf;
  out.lower = kInf;
  for (const VectorXd& z : GridCentres(domain, cells)) {
    const VectorXd b = basis.Evaluate(z);
    const double up = set.Upper(b, c);
    if (up < out.upper) {
      out.upper = up;
      out.argmin = z;
    }
    Box cell{z - 0.5 * cell_width, z + 0.5 * cell_width};
    double known_min = kInf;
    for (const VectorXd& w : GridCentres(cell, sub)) {
      known_min = std::min(known_min, known.dot(basis.Evaluate(w)));
    }
    const double lo = set.Lower(b, c) - known.dot(b) + known_min - slack_known - slack_set;
    out.lower = std::min(out.lower, lo);
  }
  return out;
}

StoppingGap ComputeStoppingGap(const ParameterSet& set, const BasisSet& basis,
                               const Box& domain, const VectorXd& c, int cells,
                               std::optional<double> jacobian_bound) {
  Require(set.compact(), ErrorCode::kNotCompact, "stopping gap needs a compact set");
  return ComputeStoppingGap(ConsistentSet(set), basis, domain, c, cells, jacobian_bound);
}

namespace {

double BoundAt(const OnlineProblem& problem, const ConsistentSet& set,
               const VectorXd& z) {
  return set.Upper(problem.basis.Evaluate(z), problem.c);
}

void CheckExcitation(const OnlineProblem& problem, const VectorXd& z) {
  if (problem.excitation_floor <= 0.0) return;
  const double sigma = PatternExcitation(problem.pattern, problem.basis, z);
  Require(sigma >= problem.excitation_floor, ErrorCode::kExcitationFloorViolated,
          "sigma_min of the pattern regressors is " + std::to_string(sigma));
}

void MeasureAt(const OnlineProblem& problem, MeasurementOracle& oracle,
               OnlineState& state) {
  CheckExcitation(problem, state.z);
  Dataset data = oracle.Measure(problem.pattern.offsets.colwise() + state.z);
  ParameterSet round = ParameterSet::FromDataset(data, problem.basis, oracle.noise_model());
  state.datasets.push_back(std::move(data));
  if (state.set) {
    state.set->Add(round);
  } else {
    state.set.emplace(round);
  }
}

// Alternating projections (Dykstra) onto the translated hull and the box.
VectorXd ProjectOntoNeighbourhood(const MatrixXd& vertices, const Box& box,
                                  const VectorXd& y) {
  VectorXd x = y;
  VectorXd p = VectorXd::Zero(y.size());
  VectorXd q = VectorXd::Zero(y.size());
  for (int iter = 0; iter < 50; ++iter) {
    const VectorXd u = ProjectOntoHull(vertices, x + p);
    p = x + p - u;
    const VectorXd next = box.Project(u + q);
    q = u + q - next;
    const bool done = (next - x).norm() <= 1e-12 * (1.0 + x.norm());
    x = next;
    if (done) break;
  }
  return x;
}

}  // namespace

OnlineState InitialState(const OnlineProblem& problem, MeasurementOracle& oracle,
                         const VectorXd& z0) {
  Require(problem.domain.Contains(z0, 1e-12), ErrorCode::kOutsideDomain,
          "z0 is outside the domain");
  Require(problem.c.size() == oracle.noise_model().u(), ErrorCode::kDimensionMismatch,
          "c must have m entries");
  OnlineState state;
  state.z = z0;
  MeasureAt(problem, oracle, state);
  state.bound_at_z = BoundAt(problem, *state.set, z0);
  state.bound_history.push_back(state.bound_at_z);
  return state;
}

void OnlineStep(const OnlineProblem& problem, MeasurementOracle& oracle,
                OnlineState& state) {
  Require(state.set.has_value(), ErrorCode::kInvalidArgument,
          "online state has no data");
  const ConsistentSet& set = *state.set;
  const MatrixXd& f = problem.pattern.offsets;
  const Box& domain = problem.domain;
  auto g = [&](const VectorXd& z) { return BoundAt(problem, set, z); };

  VectorXd best_z = state.z;
  double best = state.bound_at_z;
  auto consider = [&](const VectorXd& z, double value) {
    if (value < best) {
      best = value;
      best_z = z;
    }
  };

  if (problem.rule == StepRule::kFiniteSet) {
    for (int i = 0; i < f.cols(); ++i) {
      const VectorXd z = state.z + f.col(i);
      if (domain.Contains(z, 1e-12)) consider(z, g(z));
    }
  } else if (f.rows() == 1) {
    double lo = std::max(state.z(0) + f.minCoeff(), domain.lower(0));
    double hi = std::min(state.z(0) + f.maxCoeff(), domain.upper(0));
    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    VectorXd x1(1), x2(1);
    x1(0) = hi - ratio * (hi - lo);
    x2(0) = lo + ratio * (hi - lo);
    double f1 = g(x1), f2 = g(x2);
    consider(x1, f1);
    consider(x2, f2);
    // Early hops usually end on the boundary of the neighbourhood.
    for (double end : {lo, hi}) {
      const VectorXd e = VectorXd::Constant(1, end);
      consider(e, g(e));
    }
    for (int iter = 0; iter < 18; ++iter) {
      if (f1 <= f2) {
        hi = x2(0);
        x2 = x1;
        f2 = f1;
        x1(0) = hi - ratio * (hi - lo);
        f1 = g(x1);
        consider(x1, f1);
      } else {
        lo = x1(0);
        x1 = x2;
        f1 = f2;
        x2(0) = lo + ratio * (hi - lo);
        f2 = g(x2);
        consider(x2, f2);
      }
    }
  } else {
    const MatrixXd vertices = f.colwise() + state.z;
    DescentOptions options;
    options.max_iterations = 50;
    options.tolerance = 1e-7;
    const DescentResult result = ProjectedGradientDescent(
        g, [&](const VectorXd& z) { return CentralDifferenceGradient(g, z); },
        [&](const VectorXd& y) { return ProjectOntoNeighbourhood(vertices, domain, y); },
        state.z, options);
    consider(result.x, g(result.x));
  }

  Require(best <= state.bound_history.back(), ErrorCode::kHypothesisViolated,
          "online bound increased");
  state.z = best_z;
  state.bound_history.push_back(best);
  state.k += 1;
  MeasureAt(problem, oracle, state);
  // The bound computed before the new round still holds for the smaller set.
  state.bound_at_z = std::min(best, BoundAt(problem, *state.set, state.z));
}

OnlineTrace RunOnline(const OnlineProblem& problem, MeasurementOracle& oracle,
                      const VectorXd& z0, const OnlineOptions& options) {
  Require(options.rounds >= 0 && options.gap_every >= 0, ErrorCode::kInvalidArgument,
          "rounds and gap_every must be nonnegative");
  const VectorXd probe = options.probe.size() > 0 ? options.probe : z0;
  const VectorXd b_probe = problem.basis.Evaluate(probe);
  OnlineState state = InitialState(problem, oracle, z0);
  OnlineTrace trace;

  double probe_upper = kInf;
  double probe_lower = -kInf;
  double last_raw = kInf;
  bool have_gap = false;
  auto record = [&]() {
    TraceRow row;
    row.k = state.k;
    row.z = state.z;
    row.bound = state.bound_history.back();
    const double up = state.set->Upper(b_probe, problem.c);
    const double lo = state.set->Lower(b_probe, problem.c);
    row.raw_probe_uncertainty = std::max(0.0, 0.5 * (up - lo));
    probe_upper = std::min(probe_upper, up);
    probe_lower = std::max(probe_lower, lo);
    // Roundoff can cross the two bounds on a singleton set.
    row.probe_uncertainty = std::max(0.0, 0.5 * (probe_upper - probe_lower));
    if (row.raw_probe_uncertainty >
        last_raw * (1.0 + 1e-7) + 1e-8 * (1.0 + std::abs(up) + std::abs(lo))) {
      trace.raw_probe_monotone = false;
    }
    last_raw = row.raw_probe_uncertainty;
    if (!trace.rows.empty()) {
      const TraceRow& prev = trace.rows.back();
      if (row.bound > prev.bound) trace.monotone = false;
      if (row.probe_uncertainty > prev.probe_uncertainty) trace.probe_monotone = false;
    }
    row.true_value = problem.c.dot(oracle.theta_hat().transpose() *
                                   problem.basis.Evaluate(state.z));
    trace.rows.push_back(row);
  };
  auto gap = [&]() {
    StoppingGap result = ComputeStoppingGap(*state.set, problem.basis, problem.domain,
                                            problem.c, options.gap_cells,
                                            options.jacobian_bound);
    if (state.bound_at_z < result.upper) {
      result.upper = state.bound_at_z;
      result.argmin = state.z;
    }
    // Earlier brackets remain valid for the smaller set.
    if (have_gap) {
      if (trace.final_gap.upper < result.upper) {
        result.upper = trace.final_gap.upper;
        result.argmin = trace.final_gap.argmin;
      }
      result.lower = std::max(result.lower, trace.final_gap.lower);
    }
    have_gap = true;
    trace.rows.back().gap = result.gap();
    return result;
  };

  record();
  bool have_final = false;
  for (int round = 1; round <= options.rounds; ++round) {
    OnlineStep(problem, oracle, state);
    record();
    if (options.gap_every > 0 && round % options.gap_every == 0) {
      trace.final_gap = gap();
      have_final = round == options.rounds;
      if (options.target_relative &&
          trace.final_gap.gap() <=
              *options.target_relative * (1.0 + std::abs(trace.rows.back().bound))) {
        have_final = true;
        break;
      }
    }
  }
  if (!have_final) trace.final_gap = gap();
  trace.route = state.set->route();
  return trace;
}

ShrinkageStats ShrinkageExperiment(const MatrixXd& theta_hat, const BasisSet& basis,
                                   const PartitionedSymmetric& pi,
                                   const LocalPattern& pattern, const VectorXd& z,
                                   const MatrixXd& probes, double floor,
                                   const ShrinkageOptions& options) {
  Require(options.trials >= 1 && options.horizon >= 1, ErrorCode::kInvalidArgument,
          "shrinkage needs trials >= 1 and horizon >= 1");
  Require(options.epsilon > 0.0, ErrorCode::kNonPositiveEpsilon, "epsilon must be positive");
  const double sigma = PatternExcitation(pattern, basis, z);
  Require(sigma >= floor, ErrorCode::kExcitationFloorViolated,
          "sigma_min of the pattern regressors is " + std::to_string(sigma));
  const int m = pi.u();
  const VectorXd c = options.c.size() > 0 ? options.c : VectorXd::Ones(m);
  const MatrixXd points = pattern.offsets.colwise() + z;
  const int h = options.horizon;

  ShrinkageStats stats;
  stats.mean_probe_uncertainty.assign(h, 0.0);
  stats.mean_radius.assign(h, 0.0);
  stats.containment.assign(h, 0.0);
  int monotone = 0;
  int decreasing = 0;
  std::mt19937_64 directions(options.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < options.trials; ++trial) {
    MeasurementOracle oracle(theta_hat, basis, pi, NoiseMode::kUniform,
                             options.seed + 7919ULL * trial);
    std::optional<ConsistentSet> set;
    double first = 0.0, previous = kInf;
    bool trial_monotone = true;
    for (int round = 0; round < h; ++round) {
      ParameterSet data = ParameterSet::FromDataset(oracle.Measure(points), basis, pi);
      if (set) {
        set->Add(data);
      } else {
        set.emplace(data);
      }
      double u = 0.0;
      for (int p = 0; p < probes.cols(); ++p) {
        u = std::max(u, set->Uncertainty(basis.Evaluate(probes.col(p)), c));
      }
      if (round == 0) first = u;
      if (u > previous * (1.0 + 1e-7) + 1e-8) trial_monotone = false;
      previous = u;
      stats.mean_probe_uncertainty[round] += u / options.trials;
      stats.mean_radius[round] += set->BoundingBall().radius / options.trials;
      bool inside = true;
      for (int d = 0; d < options.directions && inside; ++d) {
        MatrixXd dir(theta_hat.rows(), theta_hat.cols());
        for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = normal(directions);
        inside = (set->Maximizer(dir) - theta_hat).norm() <= options.epsilon;
      }
      if (inside) stats.containment[round] += 1.0 / options.trials;
    }
    if (trial_monotone) ++monotone;
    if (previous < first) ++decreasing;
  }
  stats.monotone_fraction = static_cast<double>(monotone) / options.trials;
  stats.decreasing_fraction = static_cast<double>(decreasing) / options.trials;
  return stats;
}

Benchmark MakeBenchmark() {
  OnlineProblem problem{SeparableQuadraticBasis(1), VectorXd::Ones(1),
                        MakeBox(VectorXd::Constant(1, -2.0), VectorXd::Constant(1, 2.0)),
                        DefaultLocalPattern(1, 0.5, 1)};
  Benchmark bench{std::move(problem), (VectorXd(3) << 1.0, -1.0, 2.0).finished(),
                  EnergyNoiseModel(MatrixXd::Constant(1, 1, 0.01), 3),
                  VectorXd::Constant(1, -1.5)};
  // ||(0, 1, 2 z)|| on [-2, 2].
  bench.jacobian_bound = std::sqrt(17.0);
  return bench;
}

}  // namespace cautious
