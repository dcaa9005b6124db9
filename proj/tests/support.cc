#include "support.h"

#include <algorithm>
#include <cmath>

#include "cautious/qmi.h"

namespace cautious::testing {

MatrixXd RandomGaussian(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd g(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) g(i, j) = normal(rng);
  return g;
}

VectorXd RandomVector(int n, std::mt19937_64& rng) {
  return RandomGaussian(n, 1, rng).col(0);
}

MatrixXd RandomSpd(int n, std::mt19937_64& rng, double floor) {
  const MatrixXd g = RandomGaussian(n, n, rng);
  return g * g.transpose() / n + floor * MatrixXd::Identity(n, n);
}

MatrixXd AdmissibleNoise(const MatrixXd& q, int t, std::mt19937_64& rng,
                         double radius) {
  const int m = static_cast<int>(q.rows());
  MatrixXd v = RandomGaussian(m, t, rng);
  Eigen::JacobiSVD<MatrixXd> svd(v);
  v /= svd.singularValues()(0);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(q);
  const MatrixXd root = es.eigenvectors() *
                        es.eigenvalues().cwiseSqrt().asDiagonal() *
                        es.eigenvectors().transpose();
  return radius * root * v;
}

Instance RandomCompactInstance(std::mt19937_64& rng, int max_m, int max_k,
                               int max_t) {
  std::uniform_int_distribution<int> mdist(1, max_m);
  std::uniform_int_distribution<int> kdist(1, max_k);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int m = mdist(rng);
  const int k = kdist(rng);
  std::uniform_int_distribution<int> tdist(k, std::max(k, max_t));
  const int t = tdist(rng);
  const MatrixXd phi = RandomGaussian(k, t, rng);
  const MatrixXd theta = RandomGaussian(k, m, rng);
  const MatrixXd q = RandomSpd(m, rng) * (0.05 + unit(rng));
  const MatrixXd w = AdmissibleNoise(q, t, rng, unit(rng));
  const MatrixXd y = theta.transpose() * phi + w;
  return Instance{ParameterSet::FromData(y, phi, EnergyNoiseModel(q, t)), theta,
                  q};
}

Example1 MakeExample1() {
  Example1 ex;
  ex.y.resize(2, 3);
  ex.y << 1, 0, 1,
          1, 1, 0;
  ex.phi.resize(3, 3);
  ex.phi << 1, 1, 1,
            0, 1, 0,
            0, 0, 1;
  ex.pi = EnergyNoiseModel(MatrixXd::Identity(2, 2), 3);
  return ex;
}

double Example1Formula(const VectorXd& z, const VectorXd& c) {
  const double r = std::sqrt(std::pow(1.0 - z(0) - z(1), 2) + z(0) * z(0) +
                             z(1) * z(1));
  return c(0) * (1.0 - z(0)) + c(1) * (1.0 - z(1)) + c.norm() * r;
}

ClimbResult BoundaryClimb(const ParameterSet& set,
                          const std::function<double(const MatrixXd&)>& objective,
                          double bound, int samples, std::uint64_t seed) {
  const EllipsoidalForm form = set.ellipsoid();
  std::mt19937_64 rng(seed);
  const int k = set.k();
  const int m = set.m();
  auto to_boundary = [](MatrixXd v) {
    Eigen::JacobiSVD<MatrixXd> svd(v);
    const double s = svd.singularValues()(0);
    if (s > 0.0) v /= s;
    return v;
  };
  ClimbResult out;
  out.best = -std::numeric_limits<double>::infinity();
  out.worst_excess = -std::numeric_limits<double>::infinity();
  MatrixXd best_v;
  double sigma = 0.5;
  int stall = 0;
  const int explore = samples / 5;
  for (int s = 0; s < samples; ++s) {
    MatrixXd v;
    if (s < explore || best_v.size() == 0) {
      v = to_boundary(RandomGaussian(k, m, rng));
    } else {
      v = to_boundary(best_v + sigma * RandomGaussian(k, m, rng));
    }
    const MatrixXd theta = form.Map(v);
    ++out.samples;
    if (!QmiMembership(set.n(), theta).member) {
      ++out.non_members;
      continue;
    }
    const double value = objective(theta);
    out.worst_excess = std::max(out.worst_excess, value - bound);
    if (value > out.best) {
      out.best = value;
      best_v = v;
      stall = 0;
    } else if (s >= explore && ++stall > 30) {
      sigma = std::max(1e-7, sigma * 0.6);
      stall = 0;
    }
  }
  return out;
}

double GridMaxMinEig(const AffineLmi& lmi, int points_per_axis) {
  const int p = lmi.variables();
  double best = -std::numeric_limits<double>::infinity();
  auto coord = [&](int i, int j) {
    return lmi.lower(i) +
           (lmi.upper(i) - lmi.lower(i)) * j / (points_per_axis - 1.0);
  };
  VectorXd x(p);
  if (p == 1) {
    for (int a = 0; a < points_per_axis; ++a) {
      x(0) = coord(0, a);
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(lmi.Evaluate(x),
                                                 Eigen::EigenvaluesOnly);
      best = std::max(best, es.eigenvalues()(0));
    }
  } else {
    for (int a = 0; a < points_per_axis; ++a) {
      for (int b = 0; b < points_per_axis; ++b) {
        x(0) = coord(0, a);
        x(1) = coord(1, b);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(lmi.Evaluate(x),
                                                   Eigen::EigenvaluesOnly);
        best = std::max(best, es.eigenvalues()(0));
      }
    }
  }
  return best;
}

}  // namespace cautious::testing
