#pragma once

#include <optional>

#include "undrep/types.hpp"

namespace undrep::theory {

enum class CaseLabel { Case1_overselected, Case2_underselected, Boundary };

const char* to_string(CaseLabel label);

struct TheoryReport {
  double r_squared = 0.0;   // sum_i rho(X_1, Z_i)^2
  double s_squared = 0.0;   // sum_i rho(Z_1, Z_i)^2
  std::optional<double> turning_point;  // absent when the two sds coincide
  double c = 0.0;           // the positive threshold constant
  double q = 0.0;           // (1/beta_1) sum_j beta_j Cov(Z_1, Z_j)
  CaseLabel case_label = CaseLabel::Boundary;
  double variance_full = 0.0;     // Var(beta_hat' Z)
  double variance_reduced = 0.0;  // Var(beta_hat_[2:d]' Z_[2:d])
  double blended_rate = 1.0;      // E[xi_1]
  LinearModel biased_model;       // population estimates, original coordinates

  json to_json() const;
};

// Two-component Gaussian mixture CDF of predictions in group g:
// (1 - m_1^g) P(reduced projection <= x - alpha_hat) + m_1^g P(full <= x - alpha_hat).
// `model` holds the population-biased estimates; `target` names the
// under-reported feature. Zero-variance projections contribute a unit step.
double mixture_cdf(const LinearModel& model, const GaussianPopulation& pop, int g, double x,
                   Eigen::Index target = 0);

// Threshold at which the two component CDFs cross; above it the group
// selection-rate ordering of Prop-style analysis holds, below it reverses.
// Throws NumericalError when sd(reduced) == sd(full) (undefined).
double turning_point(const LinearModel& model, const GaussianPopulation& pop,
                     Eigen::Index target = 0);

// The positive constant c(E[Z_1], Var(Z_1), E[xi_1], S^2) that the
// covariance-weighted coefficient sum is compared against.
double case_threshold_constant(double var_z1, double mean_z1, double m, double s2);

// Full analytical classification for one target feature: computes the biased
// parameters, S^2, c, the decision quantity q, the turning point and both
// projection variances, and labels the more-under-reported group's regime at
// high thresholds. The variance comparison and the q-vs-(-c) comparison are
// cross-checked and must agree.
TheoryReport classify_case(const GaussianPopulation& pop, Eigen::Index target_feature);

}  // namespace undrep::theory
