#include "cautious/geometry.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cautious/error.h"

namespace cautious {

bool Box::Contains(const VectorXd& z, double slack) const {
  if (z.size() != lower.size()) return false;
  return ((z - lower).array() >= -slack).all() &&
         ((upper - z).array() >= -slack).all();
}

VectorXd Box::Project(const VectorXd& z) const {
  return z.cwiseMax(lower).cwiseMin(upper);
}

Box MakeBox(const VectorXd& lower, const VectorXd& upper) {
  Require(lower.size() == upper.size() && lower.size() >= 1,
          ErrorCode::kDimensionMismatch, "box bounds must match");
  Require(lower.allFinite() && upper.allFinite(), ErrorCode::kNonFinite,
          "box bounds must be finite");
  Require(((upper - lower).array() >= 0.0).all(), ErrorCode::kInvalidArgument,
          "box lower bound exceeds upper bound");
  return Box{lower, upper};
}

ConvexDomain ConvexDomain::FromBox(const Box& box) {
  ConvexDomain d;
  d.is_box_ = true;
  d.box_ = MakeBox(box.lower, box.upper);
  return d;
}

ConvexDomain ConvexDomain::FromHull(const MatrixXd& vertices) {
  Require(vertices.cols() >= 1 && vertices.rows() >= 1, ErrorCode::kEmptySet,
          "hull needs at least one vertex");
  Require(vertices.allFinite(), ErrorCode::kNonFinite, "hull vertex not finite");
  ConvexDomain d;
  d.is_box_ = false;
  d.vertices_ = vertices;
  d.box_ = Box{vertices.rowwise().minCoeff(), vertices.rowwise().maxCoeff()};
  return d;
}

int ConvexDomain::dim() const { return box_.dim(); }

VectorXd ConvexDomain::Project(const VectorXd& z) const {
  if (is_box_) return box_.Project(z);
  return ProjectOntoHull(vertices_, z);
}

VectorXd ConvexDomain::Anchor() const {
  if (is_box_) return box_.Center();
  return vertices_.rowwise().mean();
}

VectorXd ProjectOntoSimplex(const VectorXd& v) {
  const auto n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    cumulative += u[static_cast<size_t>(j)];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[static_cast<size_t>(j)] - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).cwiseMax(0.0);
}

VectorXd ProjectOntoHull(const MatrixXd& vertices, const VectorXd& y) {
  Require(vertices.rows() == y.size(), ErrorCode::kDimensionMismatch,
          "projection point has the wrong dimension");
  const auto p = vertices.cols();
  if (p == 1) return vertices.col(0);
  // Accelerated projected gradient on the barycentric weights of
  // min ||V w - y||^2 over the simplex. The problems here are tiny.
  const MatrixXd gram = vertices.transpose() * vertices;
  const VectorXd lin = vertices.transpose() * y;
  const double lip = std::max(SpectralNorm(gram), 1e-300);
  VectorXd w = VectorXd::Constant(p, 1.0 / static_cast<double>(p));
  VectorXd w_prev = w;
  double momentum = 1.0;
  for (int it = 0; it < 20000; ++it) {
    const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    const VectorXd look = w + ((momentum - 1.0) / next) * (w - w_prev);
    momentum = next;
    w_prev = w;
    w = ProjectOntoSimplex(look - (gram * look - lin) / lip);
    if ((w - w_prev).lpNorm<Eigen::Infinity>() < 1e-15) break;
  }
  return vertices * w;
}

DescentResult ProjectedGradientDescent(const ScalarFn& f, const GradientFn& grad,
                                       const ProjectionFn& project,
                                       const VectorXd& x0,
                                       const DescentOptions& options) {
  DescentResult result;
  VectorXd x = project(x0);
  double fx = f(x);
  double step = options.initial_step;
  for (int it = 0; it < options.max_iterations; ++it) {
    result.iterations = it + 1;
    const VectorXd g = grad(x);
    if (!g.allFinite()) break;
    if ((x - project(x - g)).norm() <= options.tolerance) {
      result.converged = true;
      break;
    }
    bool accepted = false;
    double s = std::min(options.initial_step, 2.0 * step);
    while (s > 1e-20) {
      const VectorXd xn = project(x - s * g);
      const double fn = f(xn);
      if (std::isfinite(fn) && fn <= fx + options.armijo * g.dot(xn - x)) {
        accepted = (xn - x).norm() > 0.0;
        if (accepted) {
          x = xn;
          fx = fn;
        }
        break;
      }
      s *= 0.5;
    }
    step = s;
    if (!accepted) {
      // No descent is possible along the projected gradient at any tested
      // step length: x is stationary up to the line-search resolution.
      result.converged = true;
      break;
    }
  }
  result.x = x;
  result.value = fx;
  return result;
}

VectorXd CentralDifferenceGradient(const ScalarFn& f, const VectorXd& x,
                                   double relative_step) {
  VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = relative_step * (1.0 + std::abs(x(i)));
    VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

}  // namespace cautious
