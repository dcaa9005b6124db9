#include "cautious/basis.h"

#include <cmath>

#include "cautious/error.h"

namespace cautious {

bool BasisMetadata::all_affine() const {
  if (curvature.empty()) return false;
  for (const Curvature c : curvature) {
    if (c != Curvature::kAffine) return false;
  }
  return true;
}

namespace {

LinearPart CoordinatesFrom(int first, int n, double remainder_norm) {
  LinearPart lp;
  for (int j = 0; j < n; ++j) lp.indices.push_back(first + j);
  lp.remainder_jacobian_norm = remainder_norm;
  return lp;
}

}  // namespace

BasisSet::BasisSet(std::string name, int input_dim, int size, EvalFn eval,
                   JacobianFn jacobian, BasisMetadata metadata)
    : name_(std::move(name)),
      input_dim_(input_dim),
      size_(size),
      eval_(std::move(eval)),
      jacobian_(std::move(jacobian)),
      metadata_(std::move(metadata)) {
  Require(input_dim_ >= 1 && size_ >= 1, ErrorCode::kDimensionMismatch,
          "basis needs positive input and output dimensions");
  Require(static_cast<bool>(eval_), ErrorCode::kInvalidArgument,
          "basis needs an evaluation function");
  Require(metadata_.curvature.empty() ||
              static_cast<int>(metadata_.curvature.size()) == size_,
          ErrorCode::kDimensionMismatch,
          "curvature flags must cover every component");
  if (metadata_.linear_part) {
    const auto& idx = metadata_.linear_part->indices;
    Require(static_cast<int>(idx.size()) == input_dim_,
            ErrorCode::kDimensionMismatch,
            "linear part must name one component per coordinate");
    for (const int i : idx) {
      Require(i >= 0 && i < size_, ErrorCode::kDimensionMismatch,
              "linear part index out of range");
    }
  }
}

VectorXd BasisSet::Evaluate(const VectorXd& z) const {
  Require(z.size() == input_dim_, ErrorCode::kDimensionMismatch,
          "basis input has the wrong dimension");
  Require(z.allFinite(), ErrorCode::kNonFinite, "basis input is not finite");
  VectorXd b = eval_(z);
  Require(b.size() == size_, ErrorCode::kDimensionMismatch,
          "basis evaluation returned the wrong size");
  Require(b.allFinite(), ErrorCode::kNonFinite, "basis value is not finite");
  return b;
}

MatrixXd BasisSet::Jacobian(const VectorXd& z) const {
  Require(z.size() == input_dim_, ErrorCode::kDimensionMismatch,
          "basis input has the wrong dimension");
  if (jacobian_) {
    MatrixXd j = jacobian_(z);
    Require(j.rows() == size_ && j.cols() == input_dim_,
            ErrorCode::kDimensionMismatch, "Jacobian has the wrong shape");
    return j;
  }
  MatrixXd j(size_, input_dim_);
  for (int i = 0; i < input_dim_; ++i) {
    const double h = 1e-6 * (1.0 + std::abs(z(i)));
    VectorXd zp = z, zm = z;
    zp(i) += h;
    zm(i) -= h;
    j.col(i) = (Evaluate(zp) - Evaluate(zm)) / (2.0 * h);
  }
  return j;
}

MatrixXd BasisSet::EvaluateColumns(const MatrixXd& points) const {
  Require(points.rows() == input_dim_, ErrorCode::kDimensionMismatch,
          "points must have one row per input dimension");
  MatrixXd phi(size_, points.cols());
  for (Eigen::Index t = 0; t < points.cols(); ++t) {
    phi.col(t) = Evaluate(points.col(t));
  }
  return phi;
}

BasisSet AffineBasis(int n) {
  BasisMetadata md;
  md.curvature.assign(static_cast<size_t>(n + 1), Curvature::kAffine);
  md.lipschitz = 1.0;
  md.jacobian_norm_bound = 1.0;
  md.linear_part = CoordinatesFrom(1, n, 0.0);
  return BasisSet(
      "affine", n, n + 1,
      [n](const VectorXd& z) {
        VectorXd b(n + 1);
        b(0) = 1.0;
        b.tail(n) = z;
        return b;
      },
      [n](const VectorXd&) {
        MatrixXd j = MatrixXd::Zero(n + 1, n);
        j.bottomRows(n) = MatrixXd::Identity(n, n);
        return j;
      },
      md);
}

namespace {

void EnumerateExponents(int n, int degree, int var, std::vector<int>& current,
                        std::vector<std::vector<int>>& out) {
  if (var == n - 1) {
    current[static_cast<size_t>(var)] = degree;
    out.push_back(current);
    return;
  }
  for (int e = degree; e >= 0; --e) {
    current[static_cast<size_t>(var)] = e;
    EnumerateExponents(n, degree - e, var + 1, current, out);
  }
}

double IntPow(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

}  // namespace

BasisSet PolynomialBasis(int n, int degree) {
  Require(n >= 1 && degree >= 0, ErrorCode::kInvalidArgument,
          "polynomial basis needs n >= 1 and degree >= 0");
  std::vector<std::vector<int>> exps;
  for (int d = 0; d <= degree; ++d) {
    std::vector<int> current(static_cast<size_t>(n), 0);
    EnumerateExponents(n, d, 0, current, exps);
  }
  const int k = static_cast<int>(exps.size());

  BasisMetadata md;
  for (const auto& e : exps) {
    int total = 0, nonzero = 0, single = -1;
    for (int i = 0; i < n; ++i) {
      total += e[static_cast<size_t>(i)];
      if (e[static_cast<size_t>(i)] > 0) {
        ++nonzero;
        single = e[static_cast<size_t>(i)];
      }
    }
    if (total <= 1) {
      md.curvature.push_back(Curvature::kAffine);
    } else if (nonzero == 1 && single % 2 == 0) {
      // An even power of one coordinate is convex but flat along the others.
      md.curvature.push_back(n == 1 ? Curvature::kStrictlyConvex
                                    : Curvature::kConvex);
    } else {
      md.curvature.push_back(Curvature::kUnknown);
    }
  }
  if (degree <= 1) {
    md.lipschitz = 1.0;
    md.jacobian_norm_bound = 1.0;
    if (degree == 1) md.linear_part = CoordinatesFrom(1, n, 0.0);
  }

  auto eval = [exps, n, k](const VectorXd& z) {
    VectorXd b(k);
    for (int j = 0; j < k; ++j) {
      double v = 1.0;
      for (int i = 0; i < n; ++i) v *= IntPow(z(i), exps[static_cast<size_t>(j)][static_cast<size_t>(i)]);
      b(j) = v;
    }
    return b;
  };
  auto jac = [exps, n, k](const VectorXd& z) {
    MatrixXd jm = MatrixXd::Zero(k, n);
    for (int j = 0; j < k; ++j) {
      const auto& e = exps[static_cast<size_t>(j)];
      for (int i = 0; i < n; ++i) {
        const int ei = e[static_cast<size_t>(i)];
        if (ei == 0) continue;
        double v = static_cast<double>(ei) * IntPow(z(i), ei - 1);
        for (int l = 0; l < n; ++l) {
          if (l != i) v *= IntPow(z(l), e[static_cast<size_t>(l)]);
        }
        jm(j, i) = v;
      }
    }
    return jm;
  };
  return BasisSet("polynomial", n, k, eval, jac, md);
}

BasisSet QuadraticBasis(int n) {
  BasisSet b = PolynomialBasis(n, 2);
  return BasisSet("quadratic", n, b.size(),
                  [b](const VectorXd& z) { return b.Evaluate(z); },
                  [b](const VectorXd& z) { return b.Jacobian(z); },
                  b.metadata());
}

BasisSet SeparableQuadraticBasis(int n) {
  BasisMetadata md;
  md.curvature.assign(static_cast<size_t>(n + 1), Curvature::kAffine);
  for (int i = 0; i < n; ++i) {
    md.curvature.push_back(n == 1 ? Curvature::kStrictlyConvex
                                  : Curvature::kConvex);
  }
  const int k = 2 * n + 1;
  return BasisSet(
      "separable_quadratic", n, k,
      [n, k](const VectorXd& z) {
        VectorXd b(k);
        b(0) = 1.0;
        b.segment(1, n) = z;
        b.tail(n) = z.cwiseProduct(z);
        return b;
      },
      [n, k](const VectorXd& z) {
        MatrixXd j = MatrixXd::Zero(k, n);
        j.block(1, 0, n, n) = MatrixXd::Identity(n, n);
        j.bottomRows(n) = (2.0 * z).asDiagonal();
        return j;
      },
      md);
}

BasisSet TrigBasis2d() {
  BasisMetadata md;
  md.curvature = {Curvature::kAffine,  Curvature::kAffine,
                  Curvature::kUnknown, Curvature::kUnknown,
                  Curvature::kUnknown, Curvature::kUnknown};
  md.lipschitz = std::sqrt(2.0);
  md.jacobian_norm_bound = std::sqrt(2.0);
  // The sine and cosine pairs have J^T J = I.
  md.linear_part = CoordinatesFrom(0, 2, 1.0);
  return BasisSet(
      "trig_2d", 2, 6,
      [](const VectorXd& z) {
        VectorXd b(6);
        b << z(0), z(1), std::sin(z(0)) - 1.0, std::sin(z(1)) - 1.0,
            std::cos(z(0)), std::cos(z(1));
        return b;
      },
      [](const VectorXd& z) {
        MatrixXd j = MatrixXd::Zero(6, 2);
        j(0, 0) = 1.0;
        j(1, 1) = 1.0;
        j(2, 0) = std::cos(z(0));
        j(3, 1) = std::cos(z(1));
        j(4, 0) = -std::sin(z(0));
        j(5, 1) = -std::sin(z(1));
        return j;
      },
      md);
}

BasisSet CompositeBasis(const BasisSet& a, const BasisSet& b) {
  Require(a.input_dim() == b.input_dim(), ErrorCode::kDimensionMismatch,
          "composite bases must share the input space");
  BasisMetadata md;
  if (!a.metadata().curvature.empty() && !b.metadata().curvature.empty()) {
    md.curvature = a.metadata().curvature;
    md.curvature.insert(md.curvature.end(), b.metadata().curvature.begin(),
                        b.metadata().curvature.end());
  }
  if (a.metadata().lipschitz && b.metadata().lipschitz) {
    md.lipschitz = std::hypot(*a.metadata().lipschitz, *b.metadata().lipschitz);
  }
  if (a.metadata().jacobian_norm_bound && b.metadata().jacobian_norm_bound) {
    md.jacobian_norm_bound = std::hypot(*a.metadata().jacobian_norm_bound,
                                        *b.metadata().jacobian_norm_bound);
  }
  if (a.metadata().linear_part && b.metadata().jacobian_norm_bound) {
    md.linear_part = a.metadata().linear_part;
    md.linear_part->remainder_jacobian_norm =
        std::hypot(a.metadata().linear_part->remainder_jacobian_norm,
                   *b.metadata().jacobian_norm_bound);
  }
  const int ka = a.size();
  const int kb = b.size();
  BasisSet::JacobianFn jac;
  if (a.has_analytic_jacobian() && b.has_analytic_jacobian()) {
    jac = [a, b, ka, kb](const VectorXd& z) {
      MatrixXd j(ka + kb, a.input_dim());
      j << a.Jacobian(z), b.Jacobian(z);
      return j;
    };
  }
  return BasisSet(
      a.name() + "+" + b.name(), a.input_dim(), ka + kb,
      [a, b, ka, kb](const VectorXd& z) {
        VectorXd v(ka + kb);
        v << a.Evaluate(z), b.Evaluate(z);
        return v;
      },
      jac, md);
}

}  // namespace cautious
