#pragma once

// Shared fixtures and independent reference computations for the unit and
// acceptance tests. Nothing here calls the closed-form bound code; the
// references are built from membership checks, sampling and brute force.

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "cautious/data.h"
#include "cautious/lmi.h"

namespace cautious::testing {

struct Instance {
  ParameterSet set;
  MatrixXd theta_true;  // k x m
  MatrixXd q;           // energy bound on the noise
};

// A compact set from T >= k Gaussian regressors, a random true parameter and
// energy-bounded noise drawn inside the admissible set.
Instance RandomCompactInstance(std::mt19937_64& rng, int max_m, int max_k,
                               int max_t);

MatrixXd RandomGaussian(int rows, int cols, std::mt19937_64& rng);
VectorXd RandomVector(int n, std::mt19937_64& rng);
MatrixXd RandomSpd(int n, std::mt19937_64& rng, double floor = 0.1);

// Noise W (m x T) with W W^T <= Q: random direction on the unit spectral
// sphere scaled by r in [0, 1].
MatrixXd AdmissibleNoise(const MatrixXd& q, int t, std::mt19937_64& rng,
                         double radius);

// Example 1: basis (1, z1, z2), points 0, e1, e2, Y = [[1,0,1],[1,1,0]],
// Pi = blkdiag(I2, -I3).
struct Example1 {
  MatrixXd y, phi;
  PartitionedSymmetric pi;
};
Example1 MakeExample1();
// The printed formula for g_c on Example 1.
double Example1Formula(const VectorXd& z, const VectorXd& c);

struct ClimbResult {
  double best = 0.0;
  double worst_excess = 0.0;  // max over samples of value - bound
  int samples = 0;
  int non_members = 0;
};

// Stochastic hill climb over the boundary of the ellipsoidal parameterization
// for sup_{theta in set} objective(theta). Every evaluated sample is checked
// for membership; `bound` is only used to record the worst excess.
ClimbResult BoundaryClimb(const ParameterSet& set,
                          const std::function<double(const MatrixXd&)>& objective,
                          double bound, int samples, std::uint64_t seed);

// Max of lambda_min(F(x)) over a uniform grid of the (1 or 2 dim) box.
double GridMaxMinEig(const AffineLmi& lmi, int points_per_axis);

}  // namespace cautious::testing
