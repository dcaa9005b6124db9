#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cautious/linalg.h"

namespace cautious {

// Curvature of a single basis component as a function of z.
enum class Curvature { kAffine, kConvex, kStrictlyConvex, kUnknown };

// b contains the coordinates themselves: component indices[j] equals z_j.
// The remaining components have Jacobian spectral norm at most
// remainder_jacobian_norm everywhere.
struct LinearPart {
  std::vector<int> indices;
  double remainder_jacobian_norm = 0.0;
};

struct BasisMetadata {
  // One entry per component, or empty when nothing is known.
  std::vector<Curvature> curvature;
  // ||b(z) - b(z')|| <= lipschitz * ||z - z'|| on the whole input space.
  std::optional<double> lipschitz;
  // sup_z ||J(b)(z)||_2.
  std::optional<double> jacobian_norm_bound;
  std::optional<LinearPart> linear_part;

  // Every component is affine in z, so b(z) = b(0) + J(0) z.
  bool all_affine() const;
};

// A vector of basis functions b: R^n -> R^k. Components with a closed-form
// Jacobian report it; otherwise Jacobian() falls back to central differences
// and has_analytic_jacobian() is false.
class BasisSet {
 public:
  using EvalFn = std::function<VectorXd(const VectorXd&)>;
  using JacobianFn = std::function<MatrixXd(const VectorXd&)>;

  BasisSet(std::string name, int input_dim, int size, EvalFn eval,
           JacobianFn jacobian, BasisMetadata metadata = {});

  const std::string& name() const { return name_; }
  int input_dim() const { return input_dim_; }
  int size() const { return size_; }
  const BasisMetadata& metadata() const { return metadata_; }
  bool has_analytic_jacobian() const { return static_cast<bool>(jacobian_); }

  VectorXd Evaluate(const VectorXd& z) const;
  MatrixXd Jacobian(const VectorXd& z) const;
  // Columns b(points.col(i)), giving the k x T regressor matrix.
  MatrixXd EvaluateColumns(const MatrixXd& points) const;

 private:
  std::string name_;
  int input_dim_;
  int size_;
  EvalFn eval_;
  JacobianFn jacobian_;
  BasisMetadata metadata_;
};

// (1, z_1, ..., z_n).
BasisSet AffineBasis(int n);
// All monomials of total degree <= degree, grouped by degree.
BasisSet PolynomialBasis(int n, int degree);
BasisSet QuadraticBasis(int n);
// (1, z_1, ..., z_n, z_1^2, ..., z_n^2).
BasisSet SeparableQuadraticBasis(int n);
// (z_1, z_2, sin z_1 - 1, sin z_2 - 1, cos z_1, cos z_2); the Jacobian has
// spectral norm sqrt(2) everywhere.
BasisSet TrigBasis2d();
// Concatenation [a(z); b(z)] of two bases over the same input space.
BasisSet CompositeBasis(const BasisSet& a, const BasisSet& b);

}  // namespace cautious
