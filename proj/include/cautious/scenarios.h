#pragma once

// Reproducible problem instances: the small linear regression example, the
// trigonometric contraction system and the fixed-wing UAV regulation task.

#include <cstdint>
#include <random>

#include "cautious/basis.h"
#include "cautious/data.h"
#include "cautious/geometry.h"

namespace cautious {

// How W (m x T) with W W^T <= Q is drawn. Every shape maps a contraction V
// with ||V||_2 <= 1 through Q^{1/2}.
enum class NoiseShape {
  // Gaussian direction on the unit spectral sphere, uniform radius in [0, 1].
  kRadial,
  // Uniform over the admissible set. For T much larger than m the singular
  // values of V concentrate near 1, so W W^T is close to Q.
  kUniform,
  // Gaussian direction on the unit spectral sphere.
  kBoundary,
  kZero,
};

const char* NoiseShapeName(NoiseShape shape);

MatrixXd SampleEnergyNoise(const MatrixXd& q, int t, NoiseShape shape,
                           std::mt19937_64& rng);

struct RegressionExample {
  MatrixXd y;    // 2 x 3
  MatrixXd phi;  // 3 x 3, basis (1, z1, z2) at 0, e1, e2
  PartitionedSymmetric pi;
  BasisSet basis;
};
RegressionExample MakeRegressionExample();

struct ContractionScenario {
  BasisSet basis;
  MatrixXd theta_hat;  // 6 x 2
  Dataset data;        // states along the trajectory, noisy derivatives
  PartitionedSymmetric pi;
  ParameterSet set;
};

struct ContractionOptions {
  double noise_energy = 10.0;  // W W^T <= noise_energy * I
  int samples = 26;            // t = 0, 0.01, ...
  double step = 0.01;
  double z0_1 = 10.0;
  double z0_2 = -20.0;
  NoiseShape noise = NoiseShape::kRadial;
};

ContractionScenario MakeContractionScenario(std::uint64_t seed,
                                            const ContractionOptions& options = {});

// Right-hand side of the true system.
VectorXd ContractionField(const MatrixXd& theta, const BasisSet& basis,
                          const VectorXd& z);

struct UavScenario {
  MatrixXd a_hat, b_hat;
  MatrixXd states;  // 4 x (T + 1), with process noise
  MatrixXd inputs;  // 1 x T
  SystemSet system;
  BasisSet basis;
  MatrixXd theta_hat;  // 5 x 4
  Dataset cost_data;   // noisy cost samples along the trajectory
  ParameterSet cost_set;
  Box region;          // search box for the regulation step
};

struct UavOptions {
  int horizon = 20;
  double input = -4.0;
  double process_energy = 1e-4;  // W_s W_s^T <= process_energy * I
  double cost_energy = 1.0;      // W W^T <= cost_energy * I
  NoiseShape process_noise = NoiseShape::kUniform;
  NoiseShape cost_noise = NoiseShape::kUniform;
};

UavScenario MakeUavScenario(std::uint64_t seed, const UavOptions& options = {});

}  // namespace cautious
