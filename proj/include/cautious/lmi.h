#pragma once

#include <functional>
#include <vector>

#include "cautious/linalg.h"

namespace cautious {

// F(x) = constant + sum_i x_i * terms[i] over the box lower <= x <= upper.
// Every certificate in the library reduces to asking whether
// lambda_min(F(x)) >= -tol for some x in the box.
struct AffineLmi {
  MatrixXd constant;
  std::vector<MatrixXd> terms;
  VectorXd lower;
  VectorXd upper;

  int size() const { return static_cast<int>(constant.rows()); }
  int variables() const { return static_cast<int>(terms.size()); }
  MatrixXd Evaluate(const VectorXd& x) const;
};

struct LmiOptions {
  int max_iterations = 10000;
  // Starting point; empty means the origin. It is pulled into the interior
  // of the box before the search starts.
  VectorXd warm_start;
  // When false the search returns at the first verified feasible point.
  bool maximize = false;
  // Accept a witness only when lambda_min(F) >= 0 exactly instead of within
  // the PSD tolerance, and report infeasible as soon as the dual bound is
  // negative. Bisection routes that must never undershoot use this.
  bool strict = false;
};

struct LmiResult {
  bool feasible = false;
  // False when the iteration cap was hit before either a verified witness or
  // a dual certificate of infeasibility was found.
  bool converged = false;
  VectorXd witness;
  // lambda_min(F(witness)), recomputed from scratch.
  double min_eigenvalue = 0.0;
  // Certified upper bound on max_x lambda_min(F(x)) over the box.
  double upper_bound = 0.0;
  int iterations = 0;
};

// Maximizes lambda_min(F(x)) with a log-barrier interior point method on
// { (x, t) : F(x) - t I >= 0, x in box }. Feasibility verdicts come from an
// exact eigenvalue evaluation at the returned witness; infeasibility verdicts
// come from the dual bound tr(F(x) Z) with Z = S^{-1} / tr(S^{-1}).
LmiResult SolveAffineLmi(const AffineLmi& lmi, const LmiOptions& options = {});

// Smallest value v in [lo, hi] with feasible(v), assuming feasibility is
// monotone in v. `hi` is returned untested when nothing smaller passes, so the
// caller must supply an upper end that is already known to be valid.
double BisectSmallestFeasible(double lo, double hi,
                              const std::function<bool(double)>& feasible,
                              int max_iterations, double relative_width = 1e-12);

}  // namespace cautious
