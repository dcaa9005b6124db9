#include "cautious/lmi.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cautious/error.h"

namespace cautious {

MatrixXd AffineLmi::Evaluate(const VectorXd& x) const {
  MatrixXd f = constant;
  for (size_t i = 0; i < terms.size(); ++i) {
    f += x(static_cast<Eigen::Index>(i)) * terms[i];
  }
  return Symmetrize(f);
}

namespace {

void ValidateLmi(const AffineLmi& lmi) {
  const auto d = lmi.constant.rows();
  Require(d >= 1 && lmi.constant.cols() == d, ErrorCode::kDimensionMismatch,
          "LMI constant must be a nonempty square matrix");
  Require(IsSymmetric(lmi.constant), ErrorCode::kNotSymmetric,
          "LMI constant is not symmetric");
  const auto p = static_cast<Eigen::Index>(lmi.terms.size());
  Require(lmi.lower.size() == p && lmi.upper.size() == p,
          ErrorCode::kDimensionMismatch, "LMI bounds do not match the terms");
  for (Eigen::Index i = 0; i < p; ++i) {
    const MatrixXd& t = lmi.terms[static_cast<size_t>(i)];
    Require(t.rows() == d && t.cols() == d, ErrorCode::kDimensionMismatch,
            "LMI term has the wrong size");
    Require(IsSymmetric(t), ErrorCode::kNotSymmetric,
            "LMI term is not symmetric");
    Require(std::isfinite(lmi.lower(i)) && std::isfinite(lmi.upper(i)) &&
                lmi.lower(i) < lmi.upper(i),
            ErrorCode::kInvalidArgument, "LMI variable box must be finite");
  }
}

// Barrier state for the scaled problem. All variables are expressed in the
// scaled coordinates where every term has unit spectral norm.
struct Problem {
  MatrixXd c;
  std::vector<MatrixXd> t;
  VectorXd lb, ub;

  MatrixXd F(const VectorXd& x) const {
    MatrixXd f = c;
    for (size_t i = 0; i < t.size(); ++i) f += x(static_cast<Eigen::Index>(i)) * t[i];
    return Symmetrize(f);
  }
};

bool StrictlyInBox(const Problem& pr, const VectorXd& x) {
  return ((x - pr.lb).array() > 0.0).all() && ((pr.ub - x).array() > 0.0).all();
}

// Barrier objective; returns +inf outside the domain.
double Objective(const Problem& pr, const VectorXd& x, double t, double tau) {
  if (!StrictlyInBox(pr, x)) return std::numeric_limits<double>::infinity();
  const auto d = pr.c.rows();
  MatrixXd s = pr.F(x) - t * MatrixXd::Identity(d, d);
  Eigen::LLT<MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const MatrixXd& l = llt.matrixL();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double li = l(i, i);
    if (!(li > 0.0)) return std::numeric_limits<double>::infinity();
    logdet += 2.0 * std::log(li);
  }
  double value = -tau * t - logdet;
  value -= (x - pr.lb).array().log().sum();
  value -= (pr.ub - x).array().log().sum();
  return value;
}

}  // namespace

LmiResult SolveAffineLmi(const AffineLmi& lmi, const LmiOptions& options) {
  ValidateLmi(lmi);
  const auto d = lmi.constant.rows();
  const auto p = static_cast<Eigen::Index>(lmi.terms.size());

  Problem pr;
  pr.c = Symmetrize(lmi.constant);
  VectorXd scale = VectorXd::Ones(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const MatrixXd& term = lmi.terms[static_cast<size_t>(i)];
    const double s = SpectralNorm(term);
    if (s > 0.0) scale(i) = s;
    pr.t.push_back(Symmetrize(term) / scale(i));
  }
  pr.lb = lmi.lower.cwiseProduct(scale);
  pr.ub = lmi.upper.cwiseProduct(scale);

  VectorXd x = VectorXd::Zero(p);
  if (options.warm_start.size() == p) x = options.warm_start.cwiseProduct(scale);
  for (Eigen::Index i = 0; i < p; ++i) {
    const double width = pr.ub(i) - pr.lb(i);
    const double margin = std::min(1e-3, 0.1 * width);
    x(i) = std::clamp(x(i), pr.lb(i) + margin, pr.ub(i) - margin);
  }

  LmiResult result;
  result.upper_bound = std::numeric_limits<double>::infinity();
  double best = -std::numeric_limits<double>::infinity();
  VectorXd best_x = x;
  bool best_feasible = false;

  // Exact verification at a candidate point; keeps the best seen.
  auto record = [&](const VectorXd& candidate) {
    const MatrixXd f = pr.F(candidate);
    const double ev = MinEigenvalue(f);
    const bool ok = options.strict ? ev >= 0.0 : ev >= -PsdTolerance(f);
    if (ev > best) {
      best = ev;
      best_x = candidate;
      best_feasible = ok;
    }
    return ok;
  };
  auto finish = [&](bool converged) {
    result.converged = converged;
    result.feasible = best_feasible;
    result.witness = best_x.cwiseQuotient(scale);
    result.min_eigenvalue = best;
    result.upper_bound = std::max(result.upper_bound, best);
    return result;
  };

  const bool first_ok = record(x);
  if (p == 0) {
    result.upper_bound = best;
    return finish(true);
  }
  if (first_ok && !options.maximize) return finish(true);

  double t = best - 0.1 * (1.0 + std::abs(best));
  const double nu = static_cast<double>(d + 2 * p);
  double tau = nu / (1.0 + std::abs(best));
  const MatrixXd eye = MatrixXd::Identity(d, d);

  const auto n = p + 1;
  VectorXd grad(n);
  MatrixXd hess(n, n);
  std::vector<MatrixXd> b(static_cast<size_t>(p));

  // Rounds of tau increase without any change in the verdict quantities.
  int stalled_rounds = 0;
  double last_upper = result.upper_bound;
  double last_best = best;

  int iter = 0;
  while (iter < options.max_iterations) {
    ++iter;
    result.iterations = iter;
    const MatrixXd f = pr.F(x);
    Eigen::LLT<MatrixXd> llt(f - t * eye);
    if (llt.info() != Eigen::Success) break;  // lost the interior; give up
    const MatrixXd sinv = Symmetrize(llt.solve(eye));
    const double tr_sinv = sinv.trace();

    // Dual bound from Z = S^{-1} / tr(S^{-1}).
    {
      const MatrixXd z = sinv / tr_sinv;
      double bound = (pr.c.cwiseProduct(z)).sum();
      for (Eigen::Index i = 0; i < p; ++i) {
        const double gi = (pr.t[static_cast<size_t>(i)].cwiseProduct(z)).sum();
        bound += std::max(pr.lb(i) * gi, pr.ub(i) * gi);
      }
      result.upper_bound = std::min(result.upper_bound, bound);
    }
    const double tol = options.strict ? 0.0 : PsdTolerance(f);
    if (!options.maximize && result.upper_bound < -tol) return finish(true);
    if (options.maximize &&
        result.upper_bound - best <= 1e-10 * (1.0 + std::abs(best))) {
      return finish(true);
    }

    for (Eigen::Index i = 0; i < p; ++i) {
      b[static_cast<size_t>(i)] = sinv * pr.t[static_cast<size_t>(i)];
    }
    for (Eigen::Index i = 0; i < p; ++i) {
      const MatrixXd& bi = b[static_cast<size_t>(i)];
      const double lo = x(i) - pr.lb(i);
      const double hi = pr.ub(i) - x(i);
      grad(i) = -bi.trace() - 1.0 / lo + 1.0 / hi;
      for (Eigen::Index j = 0; j <= i; ++j) {
        const MatrixXd& bj = b[static_cast<size_t>(j)];
        const double hij = bi.cwiseProduct(bj.transpose()).sum();
        hess(i, j) = hij;
        hess(j, i) = hij;
      }
      hess(i, i) += 1.0 / (lo * lo) + 1.0 / (hi * hi);
      const double hit = -(bi.cwiseProduct(sinv.transpose())).sum();
      hess(i, p) = hit;
      hess(p, i) = hit;
    }
    grad(p) = -tau + tr_sinv;
    hess(p, p) = sinv.squaredNorm();

    const VectorXd step = -hess.ldlt().solve(grad);
    const double decrement = -grad.dot(step);

    bool centered = !(decrement > 1e-9);
    if (!centered) {
      const double f0 = Objective(pr, x, t, tau);
      double s = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls) {
        const VectorXd xn = x + s * step.head(p);
        const double tn = t + s * step(p);
        const double fn = Objective(pr, xn, tn, tau);
        // A strict decrease is required: once the objective is flat to
        // rounding the point is as centered as double precision allows.
        if (std::isfinite(fn) && fn < f0 && fn <= f0 - 0.25 * s * decrement) {
          x = xn;
          t = tn;
          accepted = true;
          break;
        }
        s *= 0.5;
      }
      if (!accepted) centered = true;
      if (accepted && record(x) && !options.maximize) return finish(true);
    }
    if (centered) {
      if (nu / tau < 1e-13 * (1.0 + std::abs(t))) {
        record(x);
        return finish(true);
      }
      const double scale_now = 1e-12 * (1.0 + std::abs(best));
      if (result.upper_bound < last_upper - scale_now || best > last_best + scale_now) {
        stalled_rounds = 0;
      } else if (++stalled_rounds >= 4) {
        // Precision floor: neither bound moves any more.
        break;
      }
      last_upper = result.upper_bound;
      last_best = best;
      tau *= 8.0;
    }
  }
  record(x);
  // Hitting the cap without a certificate either way is reported as such.
  return finish(best_feasible);
}

double BisectSmallestFeasible(double lo, double hi,
                              const std::function<bool(double)>& feasible,
                              int max_iterations, double relative_width) {
  Require(lo <= hi, ErrorCode::kInvalidArgument, "bisection bracket reversed");
  for (int i = 0; i < max_iterations; ++i) {
    if (hi - lo <= relative_width * (1.0 + std::abs(hi))) break;
    const double mid = 0.5 * (lo + hi);
    if (feasible(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace cautious
