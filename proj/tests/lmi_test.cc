#include "cautious/lmi.h"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "support.h"

namespace cautious {
namespace {

AffineLmi Scalar(double c, double a, double lo, double hi) {
  AffineLmi lmi;
  lmi.constant = MatrixXd::Constant(1, 1, c);
  lmi.terms = {MatrixXd::Constant(1, 1, a)};
  lmi.lower = VectorXd::Constant(1, lo);
  lmi.upper = VectorXd::Constant(1, hi);
  return lmi;
}

TEST(AffineLmiTest, ScalarFeasibleAndInfeasible) {
  const auto yes = SolveAffineLmi(Scalar(-1.0, 1.0, 0.0, 2.0));
  EXPECT_TRUE(yes.feasible);
  EXPECT_TRUE(yes.converged);
  EXPECT_GE(yes.witness(0), 1.0 - 1e-9);

  const auto no = SolveAffineLmi(Scalar(-1.0, 1.0, 0.0, 0.9));
  EXPECT_FALSE(no.feasible);
  EXPECT_TRUE(no.converged);
  EXPECT_LT(no.upper_bound, 0.0);
}

TEST(AffineLmiTest, MaximizeReachesTheOptimumOfAKnownProblem) {
  // F(x) = diag(x, 1 - x) on [0, 1] has max lambda_min = 1/2 at x = 1/2.
  AffineLmi lmi;
  lmi.constant = MatrixXd::Zero(2, 2);
  lmi.constant(1, 1) = 1.0;
  MatrixXd t = MatrixXd::Zero(2, 2);
  t(0, 0) = 1.0;
  t(1, 1) = -1.0;
  lmi.terms = {t};
  lmi.lower = VectorXd::Zero(1);
  lmi.upper = VectorXd::Ones(1);
  LmiOptions opts;
  opts.maximize = true;
  const auto r = SolveAffineLmi(lmi, opts);
  EXPECT_NEAR(r.min_eigenvalue, 0.5, 1e-8);
  EXPECT_NEAR(r.witness(0), 0.5, 1e-6);
  EXPECT_GE(r.upper_bound, r.min_eigenvalue - 1e-12);
  EXPECT_LT(r.upper_bound - r.min_eigenvalue, 1e-8);
}

// Property: on random two-variable problems the solver's verdict agrees with
// a dense grid search whenever the true optimum is clearly away from zero.
TEST(AffineLmiTest, VerdictAgreesWithGridSearch) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int d = 2 + static_cast<int>(unit(rng) * 4);
    AffineLmi lmi;
    lmi.constant = Symmetrize(testing::RandomGaussian(d, d, rng));
    for (int i = 0; i < 2; ++i)
      lmi.terms.push_back(Symmetrize(testing::RandomGaussian(d, d, rng)));
    lmi.lower = VectorXd::Constant(2, -2.0);
    lmi.upper = VectorXd::Constant(2, 2.0);
    LmiOptions opts;
    opts.maximize = true;
    const double best = SolveAffineLmi(lmi, opts).min_eigenvalue;
    // Shift so the true optimum lies a random distance from zero.
    const double shift = (unit(rng) < 0.5 ? -1.0 : 1.0) * (0.05 + 0.45 * unit(rng));
    lmi.constant -= (best - shift) * MatrixXd::Identity(d, d);
    const double grid = testing::GridMaxMinEig(lmi, 401);
    const auto r = SolveAffineLmi(lmi);
    ASSERT_TRUE(r.converged);
    // The grid underestimates the maximum by at most its resolution error,
    // which is small against the 0.05 margin for these coefficient sizes.
    if (std::abs(grid) < 0.02) continue;
    ++checked;
    EXPECT_EQ(r.feasible, grid > 0.0) << "trial " << trial << " grid " << grid;
    EXPECT_GE(r.upper_bound, grid - 1e-9);
  }
  EXPECT_GT(checked, 40);
}

TEST(AffineLmiTest, WitnessIsInsideTheBox) {
  auto lmi = Scalar(-1.0, 1.0, -5.0, 5.0);
  LmiOptions opts;
  opts.warm_start = VectorXd::Constant(1, 100.0);
  const auto r = SolveAffineLmi(lmi, opts);
  EXPECT_TRUE(r.feasible);
  EXPECT_LE(r.witness(0), 5.0);
  EXPECT_GE(r.witness(0), -5.0);
}

TEST(BisectionTest, FindsTheThresholdOfAMonotonePredicate) {
  const double v = BisectSmallestFeasible(
      0.0, 10.0, [](double x) { return x >= std::sqrt(2.0); }, 200);
  EXPECT_GE(v, std::sqrt(2.0));
  EXPECT_LT(v - std::sqrt(2.0), 1e-10);
}

TEST(BisectionTest, ReturnsTheUpperEndWhenNothingSmallerPasses) {
  EXPECT_EQ(BisectSmallestFeasible(0.0, 1.0, [](double) { return false; }, 50),
            1.0);
}

}  // namespace
}  // namespace cautious
