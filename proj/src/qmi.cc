#include "cautious/qmi.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "cautious/error.h"

namespace cautious {

PartitionedSymmetric::PartitionedSymmetric(const MatrixXd& full, int u) {
  Require(full.rows() == full.cols(), ErrorCode::kDimensionMismatch,
          "partitioned matrix must be square");
  Require(u >= 1 && u < full.rows(), ErrorCode::kDimensionMismatch,
          "partition must leave two nonempty blocks");
  Require(AllFinite(full), ErrorCode::kNonFinite,
          "partitioned matrix has non-finite entries");
  Require(IsSymmetric(full), ErrorCode::kNotSymmetric,
          "partitioned matrix is not symmetric");
  full_ = Symmetrize(full);
  u_ = u;
}

PartitionedSymmetric PartitionedSymmetric::FromBlocks(const MatrixXd& m11,
                                                      const MatrixXd& m12,
                                                      const MatrixXd& m22) {
  Require(m11.rows() == m11.cols() && m22.rows() == m22.cols() &&
              m12.rows() == m11.rows() && m12.cols() == m22.rows(),
          ErrorCode::kDimensionMismatch, "inconsistent block sizes");
  const auto u = m11.rows();
  const auto v = m22.rows();
  MatrixXd full(u + v, u + v);
  full << m11, m12, m12.transpose(), m22;
  return PartitionedSymmetric(full, static_cast<int>(u));
}

MatrixXd SchurComplement(const PartitionedSymmetric& m) {
  const MatrixXd m12 = m.m12();
  return Symmetrize(m.m11() - m12 * PseudoInverse(m.m22()) * m12.transpose());
}

void ValidateNoiseModel(const PartitionedSymmetric& pi) {
  Require(IsNegativeDefinite(pi.m22()), ErrorCode::kNotNegativeDefinite,
          "noise model requires Pi22 < 0");
  Require(IsPsd(SchurComplement(pi)), ErrorCode::kSchurNotPsd,
          "noise model requires Pi | Pi22 >= 0");
}

PartitionedSymmetric EnergyNoiseModel(const MatrixXd& q, int samples) {
  Require(q.rows() == q.cols() && q.rows() >= 1, ErrorCode::kDimensionMismatch,
          "energy bound must be square");
  Require(samples >= 1, ErrorCode::kDimensionMismatch,
          "energy noise model needs at least one sample");
  return PartitionedSymmetric::FromBlocks(
      q, MatrixXd::Zero(q.rows(), samples),
      -MatrixXd::Identity(samples, samples));
}

MatrixXd QmiValue(const PartitionedSymmetric& m, const MatrixXd& z) {
  Require(z.rows() == m.v() && z.cols() == m.u(), ErrorCode::kDimensionMismatch,
          "candidate has the wrong shape for this QMI");
  const MatrixXd m12 = m.m12();
  const MatrixXd cross = m12 * z;
  return Symmetrize(m.m11() + cross + cross.transpose() +
                    z.transpose() * m.m22() * z);
}

MembershipResult QmiMembership(const PartitionedSymmetric& m,
                               const MatrixXd& z) {
  MembershipResult result;
  result.value = QmiValue(m, z);
  result.min_eigenvalue = MinEigenvalue(result.value);
  result.member = result.min_eigenvalue >= -PsdTolerance(result.value);
  return result;
}

EllipsoidalForm EllipsoidalParameterization(const PartitionedSymmetric& m) {
  const MatrixXd m22 = m.m22();
  Require(IsNegativeDefinite(m22), ErrorCode::kNotCompact,
          "ellipsoidal form needs M22 < 0");
  const MatrixXd schur = SchurComplement(m);
  Require(IsPsd(schur), ErrorCode::kEmptySet,
          "M | M22 is not PSD, the set is empty");
  EllipsoidalForm form;
  const MatrixXd neg22 = -m22;
  form.center = neg22.ldlt().solve(m.m21());
  form.left = PdInverseSqrt(neg22);
  form.right = PsdSqrt(schur);
  return form;
}

namespace {

MatrixXd GaussianMatrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd g(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) g(i, j) = normal(rng);
  }
  return g;
}

// Q factor of a Gaussian matrix with the signs fixed by diag(R) > 0, which
// makes its distribution Haar on the Stiefel manifold.
MatrixXd HaarFrame(int rows, int cols, std::mt19937_64& rng) {
  const MatrixXd g = GaussianMatrix(rows, cols, rng);
  Eigen::HouseholderQR<MatrixXd> qr(g);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(rows, cols);
  const MatrixXd r = qr.matrixQR();
  for (int j = 0; j < cols; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

double VandermondeAbs(const std::vector<double>& x) {
  double v = 1.0;
  for (size_t i = 0; i < x.size(); ++i) {
    for (size_t j = i + 1; j < x.size(); ++j) v *= std::fabs(x[i] - x[j]);
  }
  return v;
}

// max over [0, 1]^p of prod |x_i - x_j|, attained at the Fekete points: the
// two end points and the zeros of P'_{p-1} (Jacobi weight (1, 1)), rescaled.
double VandermondeMaximum(int p) {
  std::vector<double> x{0.0, 1.0};
  if (p < 2) return 1.0;
  const int interior = p - 2;
  if (interior > 0) {
    MatrixXd jac = MatrixXd::Zero(interior, interior);
    for (int k = 1; k < interior; ++k) {
      const double kk = k;
      jac(k - 1, k) = jac(k, k - 1) =
          std::sqrt(kk * (kk + 2.0) / ((2.0 * kk + 1.0) * (2.0 * kk + 3.0)));
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(jac, Eigen::EigenvaluesOnly);
    for (int i = 0; i < interior; ++i) x.push_back(0.5 * (1.0 + eig.eigenvalues()(i)));
  }
  return VandermondeAbs(x);
}

}  // namespace

MatrixXd UniformSpectralBall(int rows, int cols, std::mt19937_64& rng) {
  Require(rows >= 1 && cols >= 1, ErrorCode::kInvalidArgument,
          "the ball needs positive dimensions");
  const int p = std::min(rows, cols);
  const int q = std::max(rows, cols);
  // sigma^2 has marginal density proportional to u^{(q - p - 1) / 2}.
  const double shape = 0.5 * static_cast<double>(q - p + 1);
  const double vmax = VandermondeMaximum(p);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> u(static_cast<size_t>(p));
  constexpr int kMaxProposals = 1000000;
  bool accepted = false;
  for (int trial = 0; trial < kMaxProposals && !accepted; ++trial) {
    for (auto& ui : u) ui = std::pow(unit(rng), 1.0 / shape);
    accepted = unit(rng) * vmax <= VandermondeAbs(u);
  }
  Require(accepted, ErrorCode::kSamplingFailure,
          "uniform spectral-ball sampling exhausted its proposals");
  VectorXd sigma(p);
  for (int i = 0; i < p; ++i) sigma(i) = std::sqrt(u[static_cast<size_t>(i)]);
  const MatrixXd left = HaarFrame(p, p, rng);
  const MatrixXd right = HaarFrame(q, p, rng);
  const MatrixXd w = left * sigma.asDiagonal() * right.transpose();  // p x q
  if (rows == p) return w;
  return w.transpose();
}

std::vector<MatrixXd> SampleQmiSet(const PartitionedSymmetric& m, int count,
                                   SampleMode mode, std::uint64_t seed) {
  Require(count >= 0, ErrorCode::kInvalidArgument, "negative sample count");
  const EllipsoidalForm form = EllipsoidalParameterization(m);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int rows = m.v();
  const int cols = m.u();
  std::vector<MatrixXd> out;
  out.reserve(static_cast<size_t>(count));
  for (int s = 0; s < count; ++s) {
    if (mode == SampleMode::kUniform) {
      out.push_back(form.Map(UniformSpectralBall(rows, cols, rng)));
      continue;
    }
    MatrixXd v = GaussianMatrix(rows, cols, rng);
    double norm = SpectralNorm(v);
    while (norm == 0.0) {
      v = GaussianMatrix(rows, cols, rng);
      norm = SpectralNorm(v);
    }
    v /= norm;
    if (mode == SampleMode::kInterior) {
      v *= std::pow(unit(rng), 1.0 / static_cast<double>(rows * cols));
    }
    out.push_back(form.Map(v));
  }
  return out;
}

}  // namespace cautious
