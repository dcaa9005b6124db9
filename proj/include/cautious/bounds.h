#pragma once

#include <optional>

#include "cautious/basis.h"
#include "cautious/data.h"
#include "cautious/geometry.h"

namespace cautious {

enum class BoundRoute {
  kClosedForm,
  kLmi,
  kRelaxed,  // LMI route without the lossless S-lemma hypothesis: an upper bound only
  kVertex,
  kCovering,
};

const char* BoundRouteName(BoundRoute route);

struct BoundResult {
  double value = 0.0;
  BoundRoute route = BoundRoute::kClosedForm;
  // S-lemma multiplier certifying the value (LMI routes).
  std::optional<double> multiplier;
  // A member of the set attaining the value (closed form, compact sets).
  std::optional<MatrixXd> maximizer;
};

struct BoundOptions {
  double multiplier_upper = 1e8;
  int max_bisections = 60;
};

// All vector-level functions take b = b(z) directly; the basis overloads
// evaluate the basis first.

// g_c = sup_{theta in Theta} c^T theta^T b, in closed form. +inf when the set
// is unbounded along b.
BoundResult LinearBound(const ParameterSet& set, const VectorXd& b,
                        const VectorXd& c);
BoundResult LinearBound(const ParameterSet& set, const BasisSet& basis,
                        const VectorXd& z, const VectorXd& c);

// The same supremum through the scalar S-lemma LMI and bisection on delta.
// Requires c^T (N|N22) c > 0.
BoundResult LinearBoundLmi(const ParameterSet& set, const VectorXd& b,
                           const VectorXd& c, const BoundOptions& options = {});

// g = sup ||theta^T b||_2 through the norm LMI and bisection on delta^2.
BoundResult NormBound(const ParameterSet& set, const VectorXd& b,
                      const BoundOptions& options = {});
BoundResult NormBound(const ParameterSet& set, const BasisSet& basis,
                      const VectorXd& z, const BoundOptions& options = {});

// theta_lse^T b.
VectorXd LseValue(const ParameterSet& set, const VectorXd& b);

// U = sqrt(lambda_max(N|N22) * b^T (-N22)^+ b).
double Uncertainty(const ParameterSet& set, const VectorXd& b);
// U_c = sqrt(c^T (N|N22) c * b^T (-N22)^+ b).
double DirectionalUncertainty(const ParameterSet& set, const VectorXd& b,
                              const VectorXd& c);

// ||theta_lse^T b|| + U, an upper bound on the norm bound.
// Throws NotInRange when b is outside the range of the regressors.
double NormBoundUpperEstimate(const ParameterSet& set, const VectorXd& b);

// N + blkdiag(lambda (2 + lambda) (N|N22), 0).
ParameterSet LambdaInflate(const ParameterSet& set, double lambda);

// sup over theta in Theta and every b with b b^T <= m_bound of ||theta^T b||.
BoundResult GlobalNormBound(const ParameterSet& set, const MatrixXd& m_bound,
                            const BoundOptions& options = {});

struct VertexBound {
  double value = 0.0;
  int argmax = -1;
  // The caller-asserted convexity premise that makes the vertex maximum a
  // bound over the whole hull.
  bool premise_certified = false;
};

// Maximum of g_c (or g when c is empty) over the given points.
VertexBound VertexMaxBound(const ParameterSet& set, const BasisSet& basis,
                           const MatrixXd& vertices,
                           const std::optional<VectorXd>& c,
                           bool convexity_certified);

struct CoveringGrid {
  MatrixXd points;  // n x G
  double epsilon = 0.0;
  Box target;
};

// Lattice with spacing at most 2 eps / sqrt(n) per axis including the box
// faces, so every point of the box is within eps of the grid.
CoveringGrid MakeCovering(const Box& box, double epsilon);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

// min_G f - eps L <= f(z) <= max_G f + eps L over the covered target, where
// f is g_c (or g) and lipschitz is a Lipschitz constant of f there.
Interval CoveringBounds(const ParameterSet& set, const BasisSet& basis,
                        const CoveringGrid& grid, double lipschitz,
                        const std::optional<VectorXd>& c);

// Evaluates g_c or g with the preferred route for the set.
double EvaluateBound(const ParameterSet& set, const VectorXd& b,
                     const std::optional<VectorXd>& c);

}  // namespace cautious
