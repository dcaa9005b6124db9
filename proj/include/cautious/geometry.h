#pragma once

#include <functional>

#include "cautious/linalg.h"

namespace cautious {

struct Box {
  VectorXd lower;
  VectorXd upper;

  int dim() const { return static_cast<int>(lower.size()); }
  bool Contains(const VectorXd& z, double slack = 0.0) const;
  VectorXd Project(const VectorXd& z) const;
  VectorXd Center() const { return 0.5 * (lower + upper); }
};

Box MakeBox(const VectorXd& lower, const VectorXd& upper);

// A compact convex domain: either a box or the convex hull of finitely many
// points (stored column-wise).
class ConvexDomain {
 public:
  static ConvexDomain FromBox(const Box& box);
  static ConvexDomain FromHull(const MatrixXd& vertices);

  int dim() const;
  bool is_box() const { return is_box_; }
  const Box& box() const { return box_; }
  const MatrixXd& vertices() const { return vertices_; }

  VectorXd Project(const VectorXd& z) const;
  // A representative interior point (box center or vertex mean).
  VectorXd Anchor() const;

 private:
  bool is_box_ = true;
  Box box_;
  MatrixXd vertices_;
};

// Euclidean projection onto the probability simplex.
VectorXd ProjectOntoSimplex(const VectorXd& v);
// Euclidean projection of y onto conv(columns of vertices).
VectorXd ProjectOntoHull(const MatrixXd& vertices, const VectorXd& y);

struct DescentOptions {
  int max_iterations = 10000;
  double tolerance = 1e-8;  // on ||x - P(x - grad)||
  double armijo = 1e-4;
  double initial_step = 1.0;
};

struct DescentResult {
  VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

using ScalarFn = std::function<double(const VectorXd&)>;
using GradientFn = std::function<VectorXd(const VectorXd&)>;
using ProjectionFn = std::function<VectorXd(const VectorXd&)>;

// Projected gradient descent with Armijo backtracking (step halving). The
// returned point never has a larger value than the projected start.
DescentResult ProjectedGradientDescent(const ScalarFn& f, const GradientFn& grad,
                                       const ProjectionFn& project,
                                       const VectorXd& x0,
                                       const DescentOptions& options = {});

VectorXd CentralDifferenceGradient(const ScalarFn& f, const VectorXd& x,
                                   double relative_step = 1e-6);

}  // namespace cautious
