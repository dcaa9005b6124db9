#pragma once

// Online cautious optimization: repeated local measurements of an unknown
// function phi_theta_hat = theta_hat^T b, with a certified upper bound on
// c^T phi_theta_hat that never increases along the iterates.

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "cautious/basis.h"
#include "cautious/data.h"
#include "cautious/geometry.h"

namespace cautious {

// W (m x T) with W^T uniform over Z(pi). Exact for every m (see
// UniformSpectralBall). Every draw is membership-checked.
std::vector<MatrixXd> UniformNoiseSample(const PartitionedSymmetric& pi, int count,
                                         std::uint64_t seed);

enum class NoiseMode {
  kUniform,
  kBoundary,  // W^T on the boundary of Z(pi) along a Gaussian direction
  kZero,
};

const char* NoiseModeName(NoiseMode mode);

// Measurements Y = theta_hat^T Phi + W of a hidden parameter.
class MeasurementOracle {
 public:
  MeasurementOracle(MatrixXd theta_hat, BasisSet basis, PartitionedSymmetric pi,
                    NoiseMode mode, std::uint64_t seed);

  // `points` is n x T with T matching the noise model. Raises OracleFailure
  // if a noise draw is not admissible or the values are not finite.
  Dataset Measure(const MatrixXd& points);

  const MatrixXd& theta_hat() const { return theta_hat_; }
  const BasisSet& basis() const { return basis_; }
  const PartitionedSymmetric& noise_model() const { return pi_; }
  NoiseMode mode() const { return mode_; }

 private:
  MatrixXd theta_hat_;
  BasisSet basis_;
  PartitionedSymmetric pi_;
  NoiseMode mode_;
  std::mt19937_64 rng_;
};

// Offsets F (n x T) with the origin in the interior of conv F. The
// neighbourhood of z is z + conv F and measurements are taken at z + F.
struct LocalPattern {
  MatrixXd offsets;
  // Largest t such that 0 = F lambda with sum lambda = 1 and lambda >= t.
  double interior_margin = 0.0;
};

// Raises InvalidPattern unless F affinely spans R^n and the origin is a
// strictly positive convex combination of its columns.
LocalPattern MakeLocalPattern(const MatrixXd& offsets);
// +-radius e_i for every axis, followed by `center_copies` zero offsets.
LocalPattern DefaultLocalPattern(int n, double radius, int center_copies = 1);

// sigma_min of Phi^F(z) = [b(z + f_1), ..., b(z + f_T)].
double PatternExcitation(const LocalPattern& pattern, const BasisSet& basis,
                         const VectorXd& z);

enum class IntersectionRoute {
  // Single-output data: the exact intersection of the per-round sets,
  // handled as a convex program with a dual certificate.
  kExact,
  // The outer approximation Z(sum_i N_i), used when m > 1 or a round has a
  // degenerate noise model.
  kNSum,
};

const char* IntersectionRouteName(IntersectionRoute route);

// The parameters consistent with every dataset collected so far.
class ConsistentSet {
 public:
  explicit ConsistentSet(const ParameterSet& initial);

  void Add(const ParameterSet& round);

  IntersectionRoute route() const { return route_; }
  int rounds() const { return static_cast<int>(rounds_.size()); }
  // Constraints still in use by the exact route after pruning.
  int active_constraints() const { return static_cast<int>(a_.size()); }
  int m() const { return outer_.m(); }
  int k() const { return outer_.k(); }

  // Certified bounds on sup / inf over the set of c^T theta^T b. The upper
  // value is a dual objective (exact route) or the closed form over the
  // outer set, so it is never below the true supremum.
  double Upper(const VectorXd& b, const VectorXd& c) const;
  double Lower(const VectorXd& b, const VectorXd& c) const;
  // (Upper - Lower) / 2.
  double Uncertainty(const VectorXd& b, const VectorXd& c) const;

  // A member maximizing <direction, theta>; direction is k x m.
  MatrixXd Maximizer(const MatrixXd& direction) const;

  // Every member satisfies ||theta - center||_F <= radius. The exact route
  // brackets the set along the principal axes of outer() (2k solves).
  struct Ball {
    MatrixXd center;
    double radius = 0.0;
  };
  Ball BoundingBall() const;

  // Z(sum_i N_i), which contains the set.
  const ParameterSet& outer() const { return outer_; }
  bool Contains(const MatrixXd& theta, double slack = 1e-9) const;

 private:
  struct Support {
    double value;
    VectorXd theta;
  };
  // sup of b^T theta over the exact intersection.
  Support Sup(const VectorXd& b) const;
  void AddConstraint(const ParameterSet& round);
  bool Recentre();
  // Refreshes ball_ and drops constraints that are strictly positive on it.
  void Prune();

  IntersectionRoute route_;
  std::vector<ParameterSet> rounds_;
  ParameterSet outer_;
  // Exact-route constraints in shifted coordinates theta = reference_ + d:
  // f_i(d) = a_i + 2 g_i^T d - d^T H_i d >= 0.
  VectorXd reference_;
  std::vector<double> a_;
  std::vector<VectorXd> g_;
  std::vector<MatrixXd> h_;
  std::vector<double> h_norm_;
  VectorXd interior_;  // analytic centre, shifted coordinates
  Ball ball_;          // shifted coordinates, exact route only
};

struct StoppingGap {
  double upper = 0.0;  // g_c at the best grid point of the domain
  double lower = 0.0;  // certified lower bound on min over the domain of c^T phi_hat
  VectorXd argmin;     // the grid point attaining `upper`
  double gap() const { return upper - lower; }
};

// Brackets min over `domain` of c^T phi_theta_hat for every theta_hat in the
// set. Grid values are combined with Lipschitz slack: `jacobian_bound` must
// bound ||J(b)(z)||_2 on the domain; when absent the basis metadata is used
// (MissingMetadata if it has none). `cells` is the grid size per axis.
StoppingGap ComputeStoppingGap(const ConsistentSet& set, const BasisSet& basis,
                               const Box& domain, const VectorXd& c, int cells = 400,
                               std::optional<double> jacobian_bound = std::nullopt);
StoppingGap ComputeStoppingGap(const ParameterSet& set, const BasisSet& basis,
                               const Box& domain, const VectorXd& c, int cells = 400,
                               std::optional<double> jacobian_bound = std::nullopt);

enum class StepRule {
  // Minimize the bound over z + conv F (golden section for n = 1,
  // projected descent otherwise).
  kNeighbourhood,
  // Only the candidates z + f_i.
  kFiniteSet,
};

struct OnlineState {
  int k = 0;
  VectorXd z;
  std::vector<Dataset> datasets;
  std::optional<ConsistentSet> set;
  // bound_history[j] = g_c(z_j) over the data available before round j.
  std::vector<double> bound_history;
  // Certified g_c at z over the current data, kept so that later rounds can
  // only lower it.
  double bound_at_z = 0.0;
};

struct OnlineProblem {
  BasisSet basis;
  VectorXd c;
  Box domain;
  LocalPattern pattern;
  StepRule rule = StepRule::kNeighbourhood;
  // sigma_min(Phi^F(z)) must stay above this at every visited point.
  double excitation_floor = 0.0;
};

// Starts from one measurement round at z0.
OnlineState InitialState(const OnlineProblem& problem, MeasurementOracle& oracle,
                         const VectorXd& z0);

// One iteration: move to the best point of the neighbourhood under the
// current set, then measure there. Raises if the bound would increase.
void OnlineStep(const OnlineProblem& problem, MeasurementOracle& oracle,
                OnlineState& state);

struct TraceRow {
  int k = 0;
  VectorXd z;
  double bound = 0.0;
  std::optional<double> gap;  // computed every `gap_every` rounds and at the end
  // Certified uncertainty at the probe: fresh upper and lower values are
  // intersected with the previous ones, which stay valid for the smaller set.
  double probe_uncertainty = 0.0;
  // The fresh value alone.
  double raw_probe_uncertainty = 0.0;
  double true_value = 0.0;  // c^T phi_theta_hat(z), for simulation studies
};

struct OnlineOptions {
  int rounds = 500;
  int gap_every = 50;  // 0: only after the last round
  int gap_cells = 400;
  // Stop early once gap <= target_relative * (1 + |bound|). Checked only
  // when a gap is computed.
  std::optional<double> target_relative = 1e-3;
  std::optional<double> jacobian_bound;
  VectorXd probe;  // uncertainty probe point; defaults to z0
};

struct OnlineTrace {
  std::vector<TraceRow> rows;
  StoppingGap final_gap;
  IntersectionRoute route = IntersectionRoute::kExact;
  bool monotone = true;
  bool probe_monotone = true;
  // Fresh probe values nonincreasing up to the solver resolution (1e-7
  // relative plus 1e-8 of the bound magnitudes).
  bool raw_probe_monotone = true;
};

OnlineTrace RunOnline(const OnlineProblem& problem, MeasurementOracle& oracle,
                      const VectorXd& z0, const OnlineOptions& options = {});

struct ShrinkageStats {
  // Per round, averaged over trials: max probe uncertainty and the outer
  // radius of the working set.
  std::vector<double> mean_probe_uncertainty;
  std::vector<double> mean_radius;
  // Fraction of trials whose fresh probe uncertainty never increased (up to
  // the solver resolution), and whose last value is strictly below the first.
  double monotone_fraction = 0.0;
  double decreasing_fraction = 0.0;
  // Per round, the fraction of trials in which every sampled extreme member
  // lies within epsilon of theta_hat.
  std::vector<double> containment;
};

struct ShrinkageOptions {
  int trials = 200;
  int horizon = 20;
  double epsilon = 0.1;
  int directions = 8;  // extreme members sampled per round
  std::uint64_t seed = 1;
  VectorXd c;  // probe direction; defaults to all ones
};

// Repeated measurement rounds at a fixed point z with uniform noise, probe
// uncertainty evaluated at the columns of `probes`. Raises
// ExcitationFloorViolated when sigma_min(Phi^F(z)) < floor.
ShrinkageStats ShrinkageExperiment(const MatrixXd& theta_hat, const BasisSet& basis,
                                   const PartitionedSymmetric& pi,
                                   const LocalPattern& pattern, const VectorXd& z,
                                   const MatrixXd& probes, double floor,
                                   const ShrinkageOptions& options = {});

// The strictly convex benchmark: phi_hat(z) = 1 - z + 2 z^2 on [-2, 2] with
// the basis (1, z, z^2), pattern {-0.5, 0.5, 0} and noise ||w|| <= 0.1.
struct Benchmark {
  OnlineProblem problem;
  MatrixXd theta_hat;
  PartitionedSymmetric pi;
  VectorXd z0;
  double minimizer = 0.25;
  double minimum = 0.875;
  double jacobian_bound = 0.0;
};

Benchmark MakeBenchmark();

}  // namespace cautious
