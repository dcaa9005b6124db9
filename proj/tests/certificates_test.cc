#include "cautious/certificates.h"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cautious/bounds.h"
#include "cautious/error.h"
#include "cautious/qmi.h"
#include "support.h"

namespace cautious {
namespace {

using testing::BoundaryClimb;
using testing::MakeExample1;
using testing::RandomGaussian;
using testing::RandomVector;

ErrorCode CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kConfig;  // sentinel: nothing thrown
}

struct BasisInstance {
  ParameterSet set;
  MatrixXd theta_true;
};

// Noisy samples of theta^T b(z) at T random points in [-2, 2]^n.
BasisInstance SampleFromBasis(const BasisSet& basis, const MatrixXd& theta,
                              int t, double noise_scale, std::mt19937_64& rng) {
  const int n = basis.input_dim();
  const int m = static_cast<int>(theta.cols());
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  MatrixXd points(n, t);
  for (int j = 0; j < t; ++j)
    for (int i = 0; i < n; ++i) points(i, j) = u(rng);
  const MatrixXd q = noise_scale * noise_scale * MatrixXd::Identity(m, m);
  const MatrixXd w = testing::AdmissibleNoise(q, t, rng, 0.9);
  Dataset data{points, theta.transpose() * basis.EvaluateColumns(points) + w};
  return {ParameterSet::FromDataset(data, basis, EnergyNoiseModel(q, t)), theta};
}

double MinOverSamples(const ParameterSet& set, const VectorXd& c, int index,
                      std::uint64_t seed) {
  const auto climb = BoundaryClimb(
      set, [&](const MatrixXd& th) { return -(th * c)(index); },
      std::numeric_limits<double>::infinity(), 3000, seed);
  return -climb.best;
}

TEST(NonnegParamsTest, MinimumMatchesABoundaryClimb) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 15; ++trial) {
    const auto inst = testing::RandomCompactInstance(rng, 3, 4, 8);
    const VectorXd c = RandomVector(inst.set.m(), rng);
    const auto r = NonnegParams(inst.set, c);
    ASSERT_EQ(r.minimum.size(), inst.set.k());
    for (int i = 0; i < inst.set.k(); ++i) {
      const double sampled = MinOverSamples(inst.set, c, i, 100 + trial);
      const double scale = 1.0 + std::abs(r.minimum(i));
      // The closed form is a lower bound on every member and is attained.
      EXPECT_GE(sampled, r.minimum(i) - 1e-9 * scale);
      EXPECT_LE(sampled - r.minimum(i), 1e-4 * scale);
      EXPECT_GE((inst.theta_true * c)(i), r.minimum(i) - 1e-9 * scale);
    }
    if (r.minimum.minCoeff() > 1e-6) {
      EXPECT_TRUE(r.holds);
    } else if (r.minimum.minCoeff() < -1e-6) {
      EXPECT_FALSE(r.holds);
    }
  }
}

TEST(NonnegParamsTest, ZeroSchurUsesTheEstimateOnly) {
  MatrixXd phi = MatrixXd::Identity(2, 2);
  MatrixXd y(1, 2);
  y << 0.5, 1.5;
  const ParameterSet set =
      ParameterSet::FromData(y, phi, EnergyNoiseModel(MatrixXd::Zero(1, 1), 2));
  const auto r = NonnegParams(set, VectorXd::Ones(1));
  EXPECT_TRUE(r.holds);
  EXPECT_EQ(r.branch, NonnegBranch::kZeroUncertainty);
  EXPECT_NEAR(r.minimum(0), 0.5, 1e-12);
  const auto neg = NonnegParams(set, -VectorXd::Ones(1));
  EXPECT_FALSE(neg.holds);
}

TEST(NonnegParamsTest, PositiveBranchAndRestrictedIndices) {
  // theta_true = (5, -5) with small noise: component 0 certified, 1 not.
  std::mt19937_64 rng(5);
  MatrixXd theta(2, 1);
  theta << 5.0, -5.0;
  const auto inst = SampleFromBasis(AffineBasis(1), theta, 12, 0.1, rng);
  EXPECT_FALSE(NonnegParams(inst.set, VectorXd::Ones(1)).holds);
  const auto only0 = NonnegParams(inst.set, VectorXd::Ones(1), {0});
  EXPECT_TRUE(only0.holds);
  EXPECT_EQ(only0.branch, NonnegBranch::kPositiveUncertainty);
  EXPECT_EQ(only0.indices, std::vector<int>{0});
}

TEST(NonnegParamsTest, RejectsZeroDirectionAndUnboundedSets) {
  const auto ex = MakeExample1();
  const ParameterSet set = ParameterSet::FromData(ex.y, ex.phi, ex.pi);
  EXPECT_EQ(CodeOf([&] { NonnegParams(set, VectorXd::Zero(2)); }),
            ErrorCode::kZeroDirection);
  EXPECT_EQ(CodeOf([&] { NonnegParams(set, VectorXd::Ones(3)); }),
            ErrorCode::kDimensionMismatch);
  // Two points for three parameters: the set is unbounded.
  const ParameterSet slab = ParameterSet::FromData(
      ex.y.leftCols(2), ex.phi.leftCols(2),
      EnergyNoiseModel(MatrixXd::Identity(2, 2), 2));
  ASSERT_FALSE(slab.compact());
  EXPECT_FALSE(NonnegParams(slab, VectorXd::Ones(2)).holds);
}

// Midpoint convexity of z -> g_c(z) on random segments inside [-2, 2]^n.
int MidpointViolations(const ParameterSet& set, const BasisSet& basis,
                       const VectorXd& c, std::mt19937_64& rng, int pairs) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const int n = basis.input_dim();
  int bad = 0;
  for (int p = 0; p < pairs; ++p) {
    VectorXd a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a(i) = u(rng);
      b(i) = u(rng);
    }
    const double ga = LinearBound(set, basis, a, c).value;
    const double gb = LinearBound(set, basis, b, c).value;
    const double gm = LinearBound(set, basis, 0.5 * (a + b), c).value;
    if (gm > 0.5 * (ga + gb) + 1e-9 * (1.0 + std::abs(ga) + std::abs(gb))) ++bad;
  }
  return bad;
}

TEST(ConvexityCertificateTest, AffineBasisRouteOnExampleOne) {
  const auto ex = MakeExample1();
  const ParameterSet set = ParameterSet::FromData(ex.y, ex.phi, ex.pi);
  const BasisSet basis = AffineBasis(2);
  const auto r = ConvexityCertificate(set, basis, VectorXd::Ones(2));
  EXPECT_TRUE(r.gc_convex);
  EXPECT_TRUE(r.functions_convex);
  EXPECT_EQ(r.route, ConvexityRoute::kTrueFunction);
  EXPECT_FALSE(r.strictly_convex);
  // With the N11 of these data, 1^T N11 1 = -4.
  EXPECT_FALSE(r.zero_in_nc);
  std::mt19937_64 rng(2);
  EXPECT_EQ(MidpointViolations(set, basis, VectorXd::Ones(2), rng, 500), 0);
}

TEST(ConvexityCertificateTest, PositiveQuadraticCoefficientIsStrictlyConvex) {
  std::mt19937_64 rng(8);
  MatrixXd theta(3, 1);
  theta << 1.0, -0.5, 2.0;
  const BasisSet basis = SeparableQuadraticBasis(1);
  const auto inst = SampleFromBasis(basis, theta, 15, 0.2, rng);
  const auto r = ConvexityCertificate(inst.set, basis, VectorXd::Ones(1));
  EXPECT_EQ(r.route, ConvexityRoute::kTrueFunction);
  EXPECT_TRUE(r.functions_convex);
  EXPECT_TRUE(r.strictly_convex);
  EXPECT_EQ(MidpointViolations(inst.set, basis, VectorXd::Ones(1), rng, 500), 0);
  // Every sampled member function is convex: nonnegative z^2 coefficient.
  for (const auto& th : SampleQmiSet(inst.set.n(), 500, SampleMode::kBoundary, 4)) {
    EXPECT_GE(th(2, 0), 0.0);
  }
}

TEST(ConvexityCertificateTest, UncertaintyRouteIsSampledAndConsistent) {
  // Large noise leaves the quadratic coefficient uncertified. The weights
  // (-N22^{-1} b(z))_2 sum to zero over the data points, so the premise can
  // only hold away from the data; [4, 6] is checked here.
  std::mt19937_64 rng(21);
  MatrixXd theta(3, 1);
  theta << 0.0, 0.0, 0.3;
  const BasisSet basis = SeparableQuadraticBasis(1);
  MatrixXd premise(1, 21);
  for (int j = 0; j < 21; ++j) premise(0, j) = 4.0 + 0.1 * j;
  const VectorXd c = VectorXd::Ones(1);
  std::uniform_real_distribution<double> u(4.0, 6.0);
  int hits = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const auto inst = SampleFromBasis(basis, theta, 8, 3.0, rng);
    const auto r = ConvexityCertificate(inst.set, basis, c, premise);
    if (r.functions_convex) continue;
    EXPECT_NE(r.route, ConvexityRoute::kAffineBasis);
    if (r.route != ConvexityRoute::kUncertainty) continue;
    ++hits;
    EXPECT_TRUE(r.sampled_premise);
    EXPECT_GE((inst.set.lse() * c)(2), 0.0);
    for (int j = 0; j < premise.cols(); ++j) {
      EXPECT_GE((inst.set.neg_n22_pinv() * basis.Evaluate(premise.col(j)))(2), 0.0);
    }
    // Midpoint convexity of g_c on the premise interval.
    for (int p = 0; p < 300; ++p) {
      const VectorXd a = VectorXd::Constant(1, u(rng));
      const VectorXd b = VectorXd::Constant(1, u(rng));
      const double ga = LinearBound(inst.set, basis, a, c).value;
      const double gb = LinearBound(inst.set, basis, b, c).value;
      const double gm = LinearBound(inst.set, basis, 0.5 * (a + b), c).value;
      EXPECT_LE(gm, 0.5 * (ga + gb) + 1e-9 * (1.0 + std::abs(ga) + std::abs(gb)));
    }
    // Without premise points the same inputs never take the route.
    EXPECT_NE(ConvexityCertificate(inst.set, basis, c).route,
              ConvexityRoute::kUncertainty);
  }
  EXPECT_GT(hits, 0);
  RecordProperty("uncertainty_route_hits", hits);
}

TEST(ConvexityCertificateTest, UnknownCurvatureIsNeverCertifiedByFunctions) {
  std::mt19937_64 rng(3);
  const BasisSet basis = TrigBasis2d();
  const MatrixXd theta = RandomGaussian(basis.size(), 2, rng);
  const auto inst = SampleFromBasis(basis, theta, 20, 0.1, rng);
  const auto r = ConvexityCertificate(inst.set, basis, VectorXd::Ones(2));
  EXPECT_FALSE(r.functions_convex);
  EXPECT_FALSE(r.gc_convex);
}

TEST(ConvexityCertificateTest, MissingCurvatureMetadataIsAnError) {
  const auto ex = MakeExample1();
  const ParameterSet set = ParameterSet::FromData(ex.y, ex.phi, ex.pi);
  const BasisSet affine = AffineBasis(2);
  const BasisSet bare("bare", 2, 3, [affine](const VectorXd& z) { return affine.Evaluate(z); },
                      nullptr);
  EXPECT_EQ(CodeOf([&] { ConvexityCertificate(set, bare, VectorXd::Ones(2)); }),
            ErrorCode::kMissingMetadata);
}

TEST(GradGcTest, MatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  for (const int n : {1, 2}) {
    const BasisSet basis = SeparableQuadraticBasis(n);
    for (int trial = 0; trial < 20; ++trial) {
      const int m = 1 + trial % 2;
      const MatrixXd theta = RandomGaussian(basis.size(), m, rng);
      const auto inst = SampleFromBasis(basis, theta, 3 * basis.size(), 0.5, rng);
      const VectorXd c = RandomVector(m, rng);
      const VectorXd z = RandomVector(n, rng);
      const VectorXd g = GradGc(inst.set, basis, z, c);
      // Independent forward-backward differences with a fixed small step.
      const double h = 1e-6;
      for (int i = 0; i < n; ++i) {
        VectorXd zp = z, zm = z;
        zp(i) += h;
        zm(i) -= h;
        const double fd = (LinearBound(inst.set, basis, zp, c).value -
                           LinearBound(inst.set, basis, zm, c).value) / (2.0 * h);
        EXPECT_NEAR(g(i), fd, 1e-5 * (1.0 + std::abs(fd)));
      }
    }
  }
}

TEST(GradGcTest, ErrorCodes) {
  const auto ex = MakeExample1();
  const ParameterSet set = ParameterSet::FromData(ex.y, ex.phi, ex.pi);
  const BasisSet affine = AffineBasis(2);
  const BasisSet nojac("nojac", 2, 3, [affine](const VectorXd& z) { return affine.Evaluate(z); },
                       nullptr, affine.metadata());
  EXPECT_EQ(CodeOf([&] { GradGc(set, nojac, VectorXd::Zero(2), VectorXd::Ones(2)); }),
            ErrorCode::kMissingJacobian);
  const BasisSet linear("linear", 2, 3,
                        [](const VectorXd& z) {
                          VectorXd b(3);
                          b << z(0), z(1), z(0) + z(1);
                          return b;
                        },
                        [](const VectorXd&) {
                          MatrixXd j(3, 2);
                          j << 1, 0, 0, 1, 1, 1;
                          return j;
                        },
                        affine.metadata());
  EXPECT_EQ(CodeOf([&] { GradGc(set, linear, VectorXd::Zero(2), VectorXd::Ones(2)); }),
            ErrorCode::kZeroBasisVector);
  const ParameterSet slab = ParameterSet::FromData(
      ex.y.leftCols(2), ex.phi.leftCols(2),
      EnergyNoiseModel(MatrixXd::Identity(2, 2), 2));
  EXPECT_EQ(CodeOf([&] { GradGc(slab, affine, VectorXd::Zero(2), VectorXd::Ones(2)); }),
            ErrorCode::kNotCompact);
}

TEST(MinimizeGcTest, MatchesTheGridMinimumOnExampleOne) {
  const auto ex = MakeExample1();
  const ParameterSet set = ParameterSet::FromData(ex.y, ex.phi, ex.pi);
  const BasisSet basis = AffineBasis(2);
  const Box box = MakeBox(VectorXd::Constant(2, -2.0), VectorXd::Constant(2, 2.0));
  const VectorXd c = VectorXd::Ones(2);
  double grid_min = std::numeric_limits<double>::infinity();
  for (int a = 0; a <= 400; ++a) {
    for (int b = 0; b <= 400; ++b) {
      VectorXd z(2);
      z << -2.0 + 0.01 * a, -2.0 + 0.01 * b;
      grid_min = std::min(grid_min, testing::Example1Formula(z, c));
    }
  }
  EXPECT_NEAR(grid_min, 2.0, 1e-12);  // attained on the grid at (0.5, 0.5)
  const auto r = MinimizeGc(set, basis, c, ConvexDomain::FromBox(box));
  EXPECT_TRUE(r.global);
  EXPECT_LE(r.value, grid_min + 1e-8);
  EXPECT_GE(r.value, grid_min - 1e-8);
  EXPECT_NEAR(r.z(0), 0.5, 1e-3);
  EXPECT_NEAR(r.z(1), 0.5, 1e-3);
}

TEST(MinimizeGcTest, StaysInsideAHullDomain) {
  const auto ex = MakeExample1();
  const ParameterSet set = ParameterSet::FromData(ex.y, ex.phi, ex.pi);
  MatrixXd v(2, 3);
  v << 1.0, 2.0, 1.0,
       1.0, 1.0, 2.0;
  const auto r = MinimizeGc(set, AffineBasis(2), VectorXd::Ones(2),
                            ConvexDomain::FromHull(v));
  EXPECT_GE(r.z(0), 1.0 - 1e-9);
  EXPECT_GE(r.z(1), 1.0 - 1e-9);
  EXPECT_LE(r.z.sum(), 3.0 + 1e-9);
  // Sampled oracle over the triangle.
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int s = 0; s < 2000; ++s) {
    double a = u(rng), b = u(rng);
    if (a + b > 1.0) {
      a = 1.0 - a;
      b = 1.0 - b;
    }
    const VectorXd z = v.col(0) + a * (v.col(1) - v.col(0)) + b * (v.col(2) - v.col(0));
    EXPECT_LE(r.value, testing::Example1Formula(z, VectorXd::Ones(2)) + 1e-8);
  }
}

// sup over members of ||P^{1/2} theta^T D||_2 by a boundary climb.
double ClimbNorm(const ParameterSet& set, const MatrixXd& d, const MatrixXd& p_sqrt,
                 std::uint64_t seed) {
  return BoundaryClimb(
             set,
             [&](const MatrixXd& th) { return SpectralNorm(p_sqrt * th.transpose() * d); },
             std::numeric_limits<double>::infinity(), 4000, seed)
      .best;
}

TEST(LipschitzTest, MinimalJacobianConstantIsSoundAndTight) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 1 + trial % 2;
    const int m = 1 + (trial / 2) % 2;
    const BasisSet basis = SeparableQuadraticBasis(n);
    const auto inst = SampleFromBasis(basis, RandomGaussian(basis.size(), m, rng),
                                      3 * basis.size(), 0.7, rng);
    const VectorXd z = RandomVector(n, rng);
    const MatrixXd p = testing::RandomSpd(m, rng, 0.5);
    const MatrixXd q = testing::RandomSpd(n, rng, 0.5);
    const auto lc = MinimalJacobianLipschitz(inst.set, basis, z, p, q);
    const MatrixXd d = basis.Jacobian(z) * PdInverseSqrt(q);
    const double sampled = ClimbNorm(inst.set, d, PsdSqrt(p), 300 + trial);
    EXPECT_GE(lc.value, sampled * (1.0 - 1e-9));
    EXPECT_LE(lc.value, sampled * (1.0 + 1e-3) + 1e-9);
    EXPECT_TRUE(LipschitzJacobianCheck(inst.set, basis, z, 1.01 * lc.value, p, q).holds);
    EXPECT_FALSE(LipschitzJacobianCheck(inst.set, basis, z, 0.99 * lc.value, p, q).holds);
  }
}

TEST(LipschitzTest, PairCheckAgreesWithSampledDifferenceQuotients) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const BasisSet basis = SeparableQuadraticBasis(2);
    const int m = 1 + trial % 2;
    const auto inst = SampleFromBasis(basis, RandomGaussian(basis.size(), m, rng),
                                      12, 0.5, rng);
    const VectorXd z = RandomVector(2, rng), zs = RandomVector(2, rng);
    const MatrixXd d = (basis.Evaluate(z) - basis.Evaluate(zs)) / (z - zs).norm();
    const double sampled = ClimbNorm(inst.set, d, MatrixXd::Identity(m, m), 500 + trial);
    EXPECT_TRUE(LipschitzPairCheck(inst.set, basis, z, zs, sampled * 1.01).holds);
    EXPECT_FALSE(LipschitzPairCheck(inst.set, basis, z, zs, sampled * 0.98).holds);
  }
}

TEST(LipschitzTest, GlobalConstantDominatesEveryMember) {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = testing::RandomCompactInstance(rng, 2, 3, 6);
    const double lb = 0.5 + trial * 0.2;
    const auto lc = MinimalGlobalLipschitz(inst.set, lb);
    const int m = inst.set.m();
    const double sampled =
        lb * ClimbNorm(inst.set, MatrixXd::Identity(inst.set.k(), inst.set.k()),
                       MatrixXd::Identity(m, m), 700 + trial);
    EXPECT_GE(lc.value, sampled * (1.0 - 1e-9));
    EXPECT_LE(lc.value, sampled * (1.0 + 1e-3));
    EXPECT_TRUE(LipschitzGlobalCheck(inst.set, lc.value * 1.01, lb).holds);
    EXPECT_FALSE(LipschitzGlobalCheck(inst.set, lc.value * 0.99, lb).holds);
  }
}

TEST(LipschitzTest, ErrorCodes) {
  const auto ex = MakeExample1();
  const ParameterSet set = ParameterSet::FromData(ex.y, ex.phi, ex.pi);
  const BasisSet basis = AffineBasis(2);
  const VectorXd z = VectorXd::Ones(2);
  EXPECT_EQ(CodeOf([&] { LipschitzPairCheck(set, basis, z, z, 1.0); }),
            ErrorCode::kCoincidentPoints);
  EXPECT_EQ(CodeOf([&] {
              LipschitzJacobianCheck(set, basis, z, 1.0, -MatrixXd::Identity(2, 2));
            }),
            ErrorCode::kNotPositiveDefinite);
  const BasisSet no_lb("no_lb", 2, 3, [basis](const VectorXd& x) { return basis.Evaluate(x); },
                       nullptr);
  EXPECT_EQ(CodeOf([&] { LipschitzGlobalCheck(set, no_lb, 1.0); }), ErrorCode::kMissingLb);
  EXPECT_EQ(CodeOf([&] { LipschitzJacobianCheck(set, no_lb, z, 1.0); }),
            ErrorCode::kMissingJacobian);
}

}  // namespace
}  // namespace cautious
