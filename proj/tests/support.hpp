#pragma once

#include <Eigen/Cholesky>
#include <utility>

#include "undrep/estimate.hpp"
#include "undrep/rng.hpp"
#include "undrep/types.hpp"

namespace testsup {

using undrep::Dataset;
using undrep::GaussianPopulation;
using undrep::LinearModel;

// Draws (G, Z, xi_target, Y) from a Gaussian population with under-reporting
// in one feature. Every draw is keyed per (seed, row), so samples are
// reproducible and order-independent. Y = alpha + beta'Z exactly.
inline Dataset sample_population(const GaussianPopulation& pop, Eigen::Index n,
                                 std::uint64_t seed, Eigen::Index target = 0) {
  const Eigen::Index d = pop.d();
  const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(pop.sigma).matrixL();

  Dataset ds;
  ds.feature_names.resize(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j)
    ds.feature_names[static_cast<std::size_t>(j)] = "z" + std::to_string(j);
  ds.continuous_flags.assign(static_cast<std::size_t>(d), 1);
  ds.Z.emplace(n, d);
  ds.xi_mask = Eigen::MatrixXd::Ones(n, d);
  ds.G.resize(n);
  ds.Y.emplace(n);

  Eigen::VectorXd g(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = static_cast<std::uint64_t>(i);
    ds.G[i] = undrep::rng::cell_unit(seed, row, 0) < pop.r ? 1 : 0;
    for (Eigen::Index j = 0; j < d; ++j)
      g[j] = undrep::rng::cell_gaussian(seed, row, static_cast<std::uint64_t>(j) + 1);
    ds.Z->row(i) = (pop.mu + L * g).transpose();
    const double m = (ds.G[i] == 1 ? pop.m1 : pop.m0)[target];
    // key 0 is the group draw and the gaussians consume keys 2..2d+3
    (*ds.xi_mask)(i, target) =
        undrep::rng::cell_unit(seed, row, 2 * static_cast<std::uint64_t>(d) + 4) < m ? 1.0 : 0.0;
    (*ds.Y)[i] = pop.alpha + pop.beta.dot(ds.Z->row(i));
  }
  ds.X = ds.Z->cwiseProduct(*ds.xi_mask);
  return ds;
}

// The worked d=2 population: zero means, unit variances, Cov = 0.5,
// beta = (1,1), blended reporting rate 0.5.
inline GaussianPopulation example_population(double cov = 0.5, double b1 = 1.0, double b2 = 1.0,
                                             double m_target = 0.5, double mu1 = 0.0) {
  GaussianPopulation pop;
  pop.mu = Eigen::Vector2d(mu1, 0.0);
  pop.sigma = Eigen::Matrix2d{{1.0, cov}, {cov, 1.0}};
  pop.alpha = 0.0;
  pop.beta = Eigen::Vector2d(b1, b2);
  pop.r = 0.5;
  pop.m0 = Eigen::Vector2d(m_target, 1.0);
  pop.m1 = Eigen::Vector2d(m_target, 1.0);
  return pop;
}

// Random moment sets with mutually uncorrelated tail features, positive
// definite by construction (Schur margin on the first row).
inline undrep::estimate::MomentSet random_moment_set(undrep::rng::SplitMix64& gen, int d_min = 2,
                                                     int d_max = 6) {
  undrep::estimate::MomentSet ms;
  const auto d = static_cast<Eigen::Index>(
      d_min + static_cast<int>(gen.next_below(static_cast<std::uint64_t>(d_max - d_min + 1))));
  ms.mu.resize(d);
  ms.sigma = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    ms.mu[j] = -2.0 + 4.0 * gen.next_unit();
    ms.sigma(j, j) = 0.3 + 2.7 * gen.next_unit();
  }
  double s2 = 0.0;
  Eigen::VectorXd rho(d);
  for (Eigen::Index j = 1; j < d; ++j) {
    rho[j] = -0.9 + 1.8 * gen.next_unit();
    s2 += rho[j] * rho[j];
  }
  if (s2 > 0.9) {
    const double scale = std::sqrt(0.9 / s2);
    for (Eigen::Index j = 1; j < d; ++j) rho[j] *= scale;
  }
  for (Eigen::Index j = 1; j < d; ++j) {
    ms.sigma(0, j) = rho[j] * std::sqrt(ms.sigma(0, 0) * ms.sigma(j, j));
    ms.sigma(j, 0) = ms.sigma(0, j);
  }
  ms.xi1_mean = 0.05 + 0.95 * gen.next_unit();
  return ms;
}

inline LinearModel random_model(undrep::rng::SplitMix64& gen, Eigen::Index d) {
  LinearModel m;
  m.alpha = -1.0 + 2.0 * gen.next_unit();
  m.beta.resize(d);
  m.beta[0] = (gen.next_unit() < 0.5 ? -1.0 : 1.0) * (0.2 + 1.8 * gen.next_unit());
  for (Eigen::Index j = 1; j < d; ++j) m.beta[j] = -2.0 + 4.0 * gen.next_unit();
  return m;
}

inline GaussianPopulation population_from_moments(const undrep::estimate::MomentSet& ms,
                                                  const LinearModel& model, double m0,
                                                  double m1, double r = 0.5) {
  GaussianPopulation pop;
  pop.mu = ms.mu;
  pop.sigma = ms.sigma;
  pop.alpha = model.alpha;
  pop.beta = model.beta;
  pop.r = r;
  pop.m0 = Eigen::VectorXd::Ones(ms.d());
  pop.m1 = Eigen::VectorXd::Ones(ms.d());
  pop.m0[0] = m0;
  pop.m1[0] = m1;
  return pop;
}

}  // namespace testsup
