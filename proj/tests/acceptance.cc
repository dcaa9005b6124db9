// Acceptance suite: one PASS/FAIL line per criterion. Run without arguments
// for all criteria or with "--only N" for one. The exit status is the number
// of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cautious/basis.h"
#include "cautious/bounds.h"
#include "cautious/certificates.h"
#include "cautious/control.h"
#include "cautious/data.h"
#include "cautious/lmi.h"
#include "cautious/online.h"
#include "cautious/qmi.h"
#include "cautious/scenarios.h"
#include "support.h"

namespace cautious {
namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  // Records one clause; the criterion passes only if every clause does.
  void Clause(bool ok, const std::string& text) {
    pass = pass && ok;
    detail << (detail.tellp() > 0 ? "; " : "") << text << (ok ? "" : " [not met]");
  }
};

std::string Num(double x, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

double RelGap(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

// The same 100 random compact instances serve criteria 2, 3 and 5.
struct Probe {
  testing::Instance inst;
  VectorXd b, c;
};

std::vector<Probe> SharedInstances() {
  std::mt19937_64 rng(2024);
  std::vector<Probe> out;
  for (int i = 0; i < 100; ++i) {
    Probe p{testing::RandomCompactInstance(rng, 4, 8, 30), {}, {}};
    p.b = testing::RandomVector(p.inst.set.k(), rng);
    p.c = testing::RandomVector(p.inst.set.m(), rng);
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------

Verdict Criterion1() {
  Verdict v;
  const auto start = Clock::now();
  const testing::Example1 ex = testing::MakeExample1();
  const ParameterSet set = ParameterSet::FromData(ex.y, ex.phi, ex.pi);
  MatrixXd n12(2, 3), n22(3, 3), lse(3, 2);
  n12 << 2, 0, 1, 2, 1, 0;
  n22 << -3, -1, -1, -1, -1, 0, -1, 0, -1;
  lse << 1, 1, -1, 0, 0, -1;
  const MatrixXd n11 = set.n().m11();
  v.Clause((n11 - MatrixXd::Identity(2, 2)).norm() <= 1e-12,
           "N11 = I2 (computed [[" + Num(n11(0, 0)) + ", " + Num(n11(0, 1)) + "], [" +
               Num(n11(1, 0)) + ", " + Num(n11(1, 1)) + "]])");
  v.Clause((set.n().m12() - n12).norm() <= 1e-12, "N12 exact");
  v.Clause((set.n().m22() - n22).norm() <= 1e-12, "N22 exact");
  v.Clause((set.lse() - lse).norm() <= 1e-12,
           "theta_lse exact (error " + Num((set.lse() - lse).norm(), 2) + ")");

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> uz(-3.0, 3.0);
  std::normal_distribution<double> gauss;
  const BasisSet basis = AffineBasis(2);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    VectorXd z(2), c(2);
    z << uz(rng), uz(rng);
    c << gauss(rng), gauss(rng);
    worst = std::max(worst, std::abs(LinearBound(set, basis, z, c).value -
                                     testing::Example1Formula(z, c)));
  }
  v.Clause(worst <= 1e-9, "g_c vs printed formula at 1000 (z, c): max error " + Num(worst, 2));
  const double t = Seconds(start);
  v.Clause(t < 1.0, "runtime " + Num(t, 3) + " s");
  return v;
}

Verdict Criterion2(const std::vector<Probe>& probes) {
  Verdict v;
  const auto start = Clock::now();
  double worst = 0.0;
  int bad = 0;
  for (const Probe& p : probes) {
    const double g = LinearBound(p.inst.set, p.b, p.c).value;
    const double g_lmi = LinearBoundLmi(p.inst.set, p.b, p.c).value;
    const double rel = std::abs(g - g_lmi) / std::max(1.0, std::abs(g));
    worst = std::max(worst, rel);
    bad += rel > 1e-6;
  }
  v.Clause(bad == 0, "closed form vs LMI bisection on 100 instances: " + std::to_string(bad) +
                         " disagreements, max relative difference " + Num(worst, 2));
  const double t = Seconds(start);
  v.Clause(t < 30.0, "runtime " + Num(t, 3) + " s");
  return v;
}

Verdict Criterion3(const std::vector<Probe>& probes) {
  Verdict v;
  const auto start = Clock::now();
  int violations = 0, loose = 0, non_members = 0;
  double worst_gap = 0.0;
  std::uint64_t seed = 7000;
  for (const Probe& p : probes) {
    const ParameterSet& set = p.inst.set;
    const double gc = LinearBound(set, p.b, p.c).value;
    const double g = NormBound(set, p.b).value;
    const auto lin = testing::BoundaryClimb(
        set, [&](const MatrixXd& th) { return p.c.dot(th.transpose() * p.b); }, gc, 10000, ++seed);
    const auto norm = testing::BoundaryClimb(
        set, [&](const MatrixXd& th) { return (th.transpose() * p.b).norm(); }, g, 10000, ++seed);
    violations += lin.worst_excess > 1e-8 * (1.0 + std::abs(gc));
    violations += norm.worst_excess > 1e-8 * (1.0 + std::abs(g));
    non_members += lin.non_members + norm.non_members;
    const double gap = (gc - lin.best) / (1.0 + std::abs(gc));
    worst_gap = std::max(worst_gap, gap);
    loose += gap > 1e-3;
  }
  v.Clause(violations == 0 && non_members == 0,
           "10^4 boundary samples per bound: " + std::to_string(violations) +
               " violations of g_c or g, " + std::to_string(non_members) + " non-members");
  v.Clause(loose == 0, "sampled maximum within 1e-3 (1 + |g_c|) of g_c: worst relative shortfall " +
                           Num(worst_gap, 2));
  const double t = Seconds(start);
  v.Clause(t < 120.0, "runtime " + Num(t, 3) + " s");
  return v;
}

Verdict Criterion4() {
  Verdict v;
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const std::vector<BasisSet> bases = {SeparableQuadraticBasis(1), SeparableQuadraticBasis(2),
                                       QuadraticBasis(2), PolynomialBasis(2, 3), TrigBasis2d()};
  double worst = 0.0;
  int points = 0, instances = 0, skipped = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const BasisSet& basis = bases[static_cast<size_t>(inst) % bases.size()];
    const int n = basis.input_dim();
    const int m = 1 + inst % 3;
    const int t = 3 * basis.size();
    const MatrixXd theta = testing::RandomGaussian(basis.size(), m, rng);
    MatrixXd pts(n, t);
    for (int j = 0; j < t; ++j)
      for (int i = 0; i < n; ++i) pts(i, j) = u(rng);
    const MatrixXd q = 0.25 * MatrixXd::Identity(m, m);
    Dataset data{pts, theta.transpose() * basis.EvaluateColumns(pts) +
                          testing::AdmissibleNoise(q, t, rng, 0.9)};
    const ParameterSet set = ParameterSet::FromDataset(data, basis, EnergyNoiseModel(q, t));
    ++instances;
    const VectorXd c = testing::RandomVector(m, rng);
    for (int k = 0; k < 100; ++k) {
      VectorXd z(n);
      for (int i = 0; i < n; ++i) z(i) = u(rng);
      if (basis.Evaluate(z).norm() < 1e-8) {
        ++skipped;
        continue;
      }
      const VectorXd grad = GradGc(set, basis, z, c);
      for (int i = 0; i < n; ++i) {
        const double h = 1e-5 * (1.0 + std::abs(z(i)));
        VectorXd zp = z, zm = z;
        zp(i) += h;
        zm(i) -= h;
        const double fd = (LinearBound(set, basis, zp, c).value -
                           LinearBound(set, basis, zm, c).value) / (2.0 * h);
        worst = std::max(worst, std::abs(grad(i) - fd) / std::max(1.0, std::abs(fd)));
      }
      ++points;
    }
  }
  v.Clause(worst <= 1e-5, std::to_string(instances) + " instances x 100 points (" +
                              std::to_string(points) + " checked, " + std::to_string(skipped) +
                              " with b(z) = 0): max relative error " + Num(worst, 2));
  return v;
}

Verdict Criterion5(const std::vector<Probe>& probes) {
  Verdict v;
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> lam(0.0, 2.0);
  double e_split = 0.0, e_schur = 0.0, e_inflate = 0.0;
  for (const Probe& p : probes) {
    const ParameterSet& set = p.inst.set;
    const double gc = LinearBound(set, p.b, p.c).value;
    const double uc = DirectionalUncertainty(set, p.b, p.c);
    e_split = std::max(e_split, RelGap(gc, p.c.dot(LseValue(set, p.b)) + uc));
    const double l = lam(rng);
    const ParameterSet inflated = LambdaInflate(set, l);
    const MatrixXd expect = (1.0 + l) * (1.0 + l) * set.schur();
    e_schur = std::max(e_schur, (SchurComplement(inflated.n()) - expect).norm() /
                                    (1.0 + expect.norm()));
    e_inflate = std::max(e_inflate, RelGap(LinearBound(inflated, p.b, p.c).value, gc + l * uc));
  }
  v.Clause(e_split <= 1e-9, "g_c = c^T phi_lse + U_c: max error " + Num(e_split, 2));
  v.Clause(e_schur <= 1e-9, "N_lambda | N22 = (1 + lambda)^2 N | N22: max error " + Num(e_schur, 2));
  v.Clause(e_inflate <= 1e-6, "g_c over Z(N_lambda) = g_c + lambda U_c: max error " + Num(e_inflate, 2));
  return v;
}

Verdict Criterion6() {
  Verdict v;
  const ContractionScenario base = MakeContractionScenario(1);
  const double est = OslUpperEstimate(base.theta_hat, base.basis, OslEstimateMode::kShift, -6.0);
  v.Clause(std::abs(est - (-1.8694)) <= 1e-3, "analytic estimate -6 + ||H|| sqrt(2) = " + Num(est, 8));
  int joint = 0, certified = 0;
  double lo = 1e300, hi = -1e300;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const ContractionScenario sc = MakeContractionScenario(seed);
    const OslMargin m = OslLseMargin(sc.set, sc.basis);
    lo = std::min(lo, m.threshold);
    hi = std::max(hi, m.threshold);
    certified += m.certified;
    joint += m.certified && m.threshold >= -2.2 && m.threshold <= -1.4;
  }
  v.Clause(joint >= 18, "seeds 1..20: threshold in [-2.2, -1.4] and certified in " +
                            std::to_string(joint) + "/20 (certified " + std::to_string(certified) +
                            "/20, thresholds in [" + Num(lo, 4) + ", " + Num(hi, 4) + "])");
  return v;
}

struct UavOutcome {
  bool stable = false;
  double lipschitz = 0.0;
  RegulationResult reg;
  SystemSet sys;
};

UavOutcome RunUav(std::uint64_t seed) {
  const UavScenario sc = MakeUavScenario(seed);
  UavOutcome out{false, 0.0, {}, sc.system};
  const StabilityResult st = QuadraticStability(sc.system);
  if (!st.certificate) return out;
  out.stable = true;
  out.sys = sc.system.WithStability(*st.certificate);
  out.lipschitz = MinimalJacobianLipschitz(sc.cost_set, sc.basis, sc.region.Center()).value;
  RegulationOptions options;
  options.seed = seed;
  out.reg = SuboptimalRegulation(sc.cost_set, sc.basis, out.sys, out.lipschitz, sc.region, options);
  return out;
}

Verdict Criterion7() {
  Verdict v;
  const auto start = Clock::now();
  const UavOutcome r = RunUav(1);
  v.Clause(r.stable, "seed 1: stability certificate found");
  if (r.stable) {
    v.Clause(r.lipschitz >= 1.5 && r.lipschitz <= 2.5, "L = " + Num(r.lipschitz, 5));
    v.Clause(r.reg.bound >= 1.5 && r.reg.bound <= 3.5, "bound = " + Num(r.reg.bound, 5));
    v.Clause(r.reg.epsilon_minus >= 0.2 && r.reg.epsilon_minus <= 0.8,
             "eps-(x*) = " + Num(r.reg.epsilon_minus, 5));
    // Fixed points of sampled consistent systems under u*.
    int inside = 0, total = 0;
    double worst = 0.0;
    for (const SampleMode mode : {SampleMode::kUniform, SampleMode::kBoundary}) {
      for (const MatrixXd& member : SampleQmiSet(r.sys.params().n(), 2500, mode, 77)) {
        const MatrixXd a = r.sys.A(member);
        const MatrixXd b = r.sys.B(member);
        const VectorXd x = (MatrixXd::Identity(4, 4) - a).partialPivLu().solve(b * r.reg.u_star);
        const double d = (x - r.reg.x_star).norm();
        worst = std::max(worst, d);
        inside += d <= r.reg.epsilon_minus * (1.0 + 1e-9) + 1e-12;
        ++total;
      }
    }
    v.Clause(inside == total, "sampled fixed points within eps- of x*: " + std::to_string(inside) +
                                  "/" + std::to_string(total) + " (max distance " + Num(worst, 4) +
                                  ")");
  }
  const double t = Seconds(start);
  v.Clause(t < 300.0, "runtime " + Num(t, 3) + " s");

  // Informational: the same pipeline over seeds 1..20.
  int certified = 0, in_l = 0, in_bound = 0, in_eps = 0;
  double eps_lo = 1e300, eps_hi = -1e300;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const UavOutcome s = RunUav(seed);
    if (!s.stable) continue;
    ++certified;
    in_l += s.lipschitz >= 1.5 && s.lipschitz <= 2.5;
    in_bound += s.reg.bound >= 1.5 && s.reg.bound <= 3.5;
    in_eps += s.reg.epsilon_minus >= 0.2 && s.reg.epsilon_minus <= 0.8;
    eps_lo = std::min(eps_lo, s.reg.epsilon_minus);
    eps_hi = std::max(eps_hi, s.reg.epsilon_minus);
  }
  v.detail << "; envelope over seeds 1..20 (not part of the verdict): certified " << certified
           << "/20, L in window " << in_l << ", bound in window " << in_bound
           << ", eps- in window " << in_eps << ", eps- range [" << Num(eps_lo, 3) << ", "
           << Num(eps_hi, 3) << "]";
  return v;
}

Verdict Criterion8() {
  Verdict v;
  const UavOutcome r = RunUav(1);
  if (!r.stable) {
    v.Clause(false, "needs the seed-1 stability certificate");
    return v;
  }
  std::mt19937_64 rng(88);
  const double at0 = EpsilonMinusAt(r.sys, VectorXd::Zero(4)).value;
  v.Clause(std::abs(at0) <= 1e-6, "eps-(0) = " + Num(at0, 3));
  int over = 0;
  for (int i = 0; i < 100; ++i) {
    const VectorXd x = testing::RandomVector(4, rng);
    over += EpsilonMinusAt(r.sys, x).value > x.norm() + 1e-6;
  }
  v.Clause(over == 0, "eps-(x) <= ||x|| at 100 random x: " + std::to_string(over) + " violations");
  int nonconvex = 0;
  double worst = -1e300;
  for (int i = 0; i < 100; ++i) {
    const VectorXd x = testing::RandomVector(4, rng);
    const VectorXd y = testing::RandomVector(4, rng);
    const double mid = EpsilonMinusAt(r.sys, 0.5 * (x + y)).value;
    const double avg = 0.5 * (EpsilonMinusAt(r.sys, x).value + EpsilonMinusAt(r.sys, y).value);
    worst = std::max(worst, mid - avg);
    nonconvex += mid > avg + 1e-6;
  }
  v.Clause(nonconvex == 0, "midpoint convexity at 100 pairs: " + std::to_string(nonconvex) +
                               " violations (max excess " + Num(worst, 2) + ")");
  return v;
}

Verdict Criterion9() {
  Verdict v;
  const auto start = Clock::now();
  const Benchmark bench = MakeBenchmark();
  OnlineOptions options;
  options.rounds = 500;
  options.gap_every = 0;
  options.target_relative = std::nullopt;
  options.jacobian_bound = bench.jacobian_bound;
  int monotone = 0, contained = 0, probe = 0, raw = 0;
  std::vector<double> gaps;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    MeasurementOracle oracle(bench.theta_hat, bench.problem.basis, bench.pi, NoiseMode::kUniform,
                             seed);
    const OnlineTrace trace = RunOnline(bench.problem, oracle, bench.z0, options);
    monotone += trace.monotone;
    probe += trace.probe_monotone;
    raw += trace.raw_probe_monotone;
    contained += trace.final_gap.lower <= bench.minimum && bench.minimum <= trace.final_gap.upper;
    gaps.push_back(trace.final_gap.gap());
  }
  std::sort(gaps.begin(), gaps.end());
  const double median = 0.5 * (gaps[24] + gaps[25]);
  v.Clause(monotone == 50, "bound traces nonincreasing in " + std::to_string(monotone) + "/50 trials");
  v.Clause(contained == 50, "stopping gap contains the optimum 0.875 in " + std::to_string(contained) + "/50");
  v.Clause(median <= 1e-2, "median final gap " + Num(median, 4) + " (range [" + Num(gaps.front(), 3) +
                               ", " + Num(gaps.back(), 3) + "])");
  v.Clause(probe == 50 && raw == 50, "probe uncertainty nonincreasing in " + std::to_string(raw) +
                                         "/50 trials (fresh values), " + std::to_string(probe) +
                                         "/50 (certified)");
  const double t = Seconds(start);
  v.Clause(t < 600.0, "runtime " + Num(t, 4) + " s");
  return v;
}

Verdict Criterion10() {
  Verdict v;
  std::mt19937_64 rng(1010);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int admitted = 0, drawn = 0, mismatch = 0, feasible = 0;
  while (admitted < 100) {
    ++drawn;
    const int d = 2 + static_cast<int>(unit(rng) * 7);
    const int vars = 1 + static_cast<int>(unit(rng) * 2);
    AffineLmi lmi;
    lmi.constant = Symmetrize(testing::RandomGaussian(d, d, rng));
    for (int i = 0; i < vars; ++i) lmi.terms.push_back(Symmetrize(testing::RandomGaussian(d, d, rng)));
    lmi.lower = VectorXd::Constant(vars, -2.0);
    lmi.upper = VectorXd::Constant(vars, 2.0);
    // Shift by a random amount so that both verdicts occur.
    lmi.constant += (2.0 * unit(rng) - 1.0) * 1.5 * MatrixXd::Identity(d, d);
    const double grid = testing::GridMaxMinEig(lmi, vars == 1 ? 4001 : 401);
    // Instances whose grid optimum sits within the grid resolution of zero
    // have no reliable reference verdict.
    if (std::abs(grid) < 0.02) continue;
    ++admitted;
    feasible += grid > 0.0;
    const LmiResult r = SolveAffineLmi(lmi);
    mismatch += !r.converged || r.feasible != (grid > 0.0);
  }
  v.Clause(mismatch == 0, std::to_string(mismatch) + " verdict mismatches on 100 instances (" +
                              std::to_string(feasible) + " feasible, " +
                              std::to_string(drawn - admitted) + " near-zero draws skipped)");
  return v;
}

}  // namespace
}  // namespace cautious

int main(int argc, char** argv) {
  using namespace cautious;
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
  }
  std::vector<Probe> probes;
  auto shared = [&]() -> const std::vector<Probe>& {
    if (probes.empty()) probes = SharedInstances();
    return probes;
  };
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria = {
      {1, [] { return Criterion1(); }},
      {2, [&] { return Criterion2(shared()); }},
      {3, [&] { return Criterion3(shared()); }},
      {4, [] { return Criterion4(); }},
      {5, [&] { return Criterion5(shared()); }},
      {6, [] { return Criterion6(); }},
      {7, [] { return Criterion7(); }},
      {8, [] { return Criterion8(); }},
      {9, [] { return Criterion9(); }},
      {10, [] { return Criterion10(); }},
  };
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    if (only != 0 && id != only) continue;
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v.Clause(false, std::string("exception: ") + e.what());
    }
    failed += !v.pass;
    std::printf("%s criterion %d: %s\n", v.pass ? "PASS" : "FAIL", id, v.detail.str().c_str());
    std::fflush(stdout);
  }
  return failed;
}
