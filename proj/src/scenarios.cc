#include "cautious/scenarios.h"

#include <algorithm>

#include "cautious/error.h"
#include "cautious/qmi.h"

namespace cautious {

const char* NoiseShapeName(NoiseShape shape) {
  switch (shape) {
    case NoiseShape::kRadial: return "radial";
    case NoiseShape::kUniform: return "uniform";
    case NoiseShape::kBoundary: return "boundary";
    case NoiseShape::kZero: return "zero";
  }
  return "unknown";
}

MatrixXd SampleEnergyNoise(const MatrixXd& q, int t, NoiseShape shape,
                           std::mt19937_64& rng) {
  const auto m = static_cast<int>(q.rows());
  Require(t >= 1 && q.rows() == q.cols(), ErrorCode::kDimensionMismatch,
          "noise needs a square Q and a positive horizon");
  if (shape == NoiseShape::kZero) return MatrixXd::Zero(m, t);
  if (shape == NoiseShape::kUniform) return PsdSqrt(q) * UniformSpectralBall(m, t, rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  MatrixXd v(m, t);
  for (int j = 0; j < t; ++j)
    for (int i = 0; i < m; ++i) v(i, j) = normal(rng);
  const double s = SpectralNorm(v);
  if (s > 0.0) v /= s;
  const double radius = shape == NoiseShape::kRadial ? unit(rng) : 1.0;
  return radius * PsdSqrt(q) * v;
}

RegressionExample MakeRegressionExample() {
  MatrixXd y(2, 3);
  y << 1, 0, 1,
       1, 1, 0;
  MatrixXd phi(3, 3);
  phi << 1, 1, 1,
         0, 1, 0,
         0, 0, 1;
  return {y, phi, EnergyNoiseModel(MatrixXd::Identity(2, 2), 3), AffineBasis(2)};
}

VectorXd ContractionField(const MatrixXd& theta, const BasisSet& basis,
                          const VectorXd& z) {
  return theta.transpose() * basis.Evaluate(z);
}

ContractionScenario MakeContractionScenario(std::uint64_t seed,
                                            const ContractionOptions& options) {
  Require(options.samples >= 1 && options.step > 0.0, ErrorCode::kInvalidArgument,
          "the trajectory needs samples and a positive step");
  BasisSet basis = TrigBasis2d();
  MatrixXd theta_t(2, 6);
  theta_t << -6, 1, -1, 1, -1, 1,
             0, -6, 1, -1, 1, -1;
  const MatrixXd theta = theta_t.transpose();

  // Classical RK4 with 50 substeps per sampling interval.
  const int sub = 50;
  const double h = options.step / sub;
  auto f = [&](const VectorXd& z) { return ContractionField(theta, basis, z); };
  MatrixXd points(2, options.samples);
  VectorXd z(2);
  z << options.z0_1, options.z0_2;
  for (int i = 0; i < options.samples; ++i) {
    points.col(i) = z;
    for (int s = 0; s < sub; ++s) {
      const VectorXd k1 = f(z);
      const VectorXd k2 = f(z + 0.5 * h * k1);
      const VectorXd k3 = f(z + 0.5 * h * k2);
      const VectorXd k4 = f(z + h * k3);
      z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }
  std::mt19937_64 rng(seed);
  const MatrixXd q = options.noise_energy * MatrixXd::Identity(2, 2);
  MatrixXd values = theta_t * basis.EvaluateColumns(points) +
                    SampleEnergyNoise(q, options.samples, options.noise, rng);
  Dataset data{points, values};
  PartitionedSymmetric pi = EnergyNoiseModel(q, options.samples);
  ParameterSet set = ParameterSet::FromDataset(data, basis, pi);
  return {std::move(basis), theta, std::move(data), std::move(pi), std::move(set)};
}

UavScenario MakeUavScenario(std::uint64_t seed, const UavOptions& options) {
  Require(options.horizon >= 1, ErrorCode::kInvalidArgument,
          "the horizon must be positive");
  MatrixXd a_cont(4, 4);
  a_cont << -0.240, 0.345, -0.411, 0,
            -1.905, -10.695, 0, 0.941,
            0, 0, 0, 1,
            0.457, -250.513, 0, -8.844;
  MatrixXd b_cont(4, 1);
  b_cont << 0, -0.301, 0, -98.658;
  const MatrixXd a_hat = MatrixXd::Identity(4, 4) + a_cont / 20.0;
  const MatrixXd b_hat = b_cont / 20.0;
  const int t = options.horizon;

  std::mt19937_64 rng(seed);
  const MatrixXd ws =
      SampleEnergyNoise(options.process_energy * MatrixXd::Identity(4, 4), t,
                        options.process_noise, rng);
  MatrixXd states(4, t + 1);
  MatrixXd inputs = MatrixXd::Constant(1, t, options.input);
  states.col(0) = VectorXd::Ones(4);
  for (int k = 0; k < t; ++k) {
    states.col(k + 1) = a_hat * states.col(k) + b_hat * inputs.col(k) + ws.col(k);
  }
  SystemSet system = SystemSet::FromTrajectory(
      states, inputs, EnergyNoiseModel(options.process_energy * MatrixXd::Identity(4, 4), t));

  BasisSet basis = AffineBasis(4);
  MatrixXd theta_hat = MatrixXd::Zero(5, 4);
  theta_hat(0, 0) = -1.0;  // -x_hat^T with x_hat = e1
  theta_hat.bottomRows(4) = MatrixXd::Identity(4, 4);
  const MatrixXd points = states.leftCols(t);
  const MatrixXd q = options.cost_energy * MatrixXd::Identity(4, 4);
  Dataset data{points, theta_hat.transpose() * basis.EvaluateColumns(points) +
                           SampleEnergyNoise(q, t, options.cost_noise, rng)};
  ParameterSet cost_set = ParameterSet::FromDataset(data, basis, EnergyNoiseModel(q, t));

  // The visited state range, widened by its own span on each side.
  const VectorXd lo = points.rowwise().minCoeff();
  const VectorXd hi = points.rowwise().maxCoeff();
  const VectorXd span = (hi - lo).cwiseMax(0.1);
  Box region = MakeBox(lo - span, hi + span);

  return {a_hat,           b_hat,           states,
          inputs,          std::move(system), std::move(basis),
          theta_hat,       std::move(data),     std::move(cost_set),
          std::move(region)};
}

}  // namespace cautious
