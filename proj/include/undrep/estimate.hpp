#pragma once

#include "undrep/types.hpp"

namespace undrep::estimate {

// Population moments of the latent features plus the blended reporting rate
// E[xi_1] = r*m1_1 + (1-r)*m0_1 of the under-reported feature (feature 0 by
// convention throughout this module).
struct MomentSet {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  double xi1_mean = 1.0;

  Eigen::Index d() const { return mu.size(); }

  double var_z1() const { return sigma(0, 0); }
  double ez1_sq() const { return sigma(0, 0) + mu[0] * mu[0]; }
  // Var(Z_1 xi_1) = Var(Z_1) E[xi_1]^2 + Var(xi_1) E[Z_1^2].
  double var_x1() const {
    const double m = xi1_mean;
    return var_z1() * m * m + m * (1.0 - m) * ez1_sq();
  }
  // S^2 = sum_{i>=2} rho(Z_1, Z_i)^2.
  double s_squared() const;
  // R^2 = sum_{i>=2} rho(X_1, Z_i)^2, with Cov(X_1, Z_i) = E[xi_1] Cov(Z_1, Z_i).
  double r_squared() const;

  // Throws unless sigma is symmetric PD, the tail features are mutually
  // uncorrelated (|rho| <= 1e-10), and xi1_mean lies in (0,1].
  void validate() const;
};

struct OlsOptions {
  double rank_tol = 1e-10;  // relative singular-value cutoff on the centered design
};

// Least squares with intercept, solved via SVD of the centered design.
LinearModel ols_fit(const Eigen::Ref<const Eigen::MatrixXd>& X,
                    const Eigen::Ref<const Eigen::VectorXd>& y, const OlsOptions& opts = {});

// Population-level parameter estimates of the regression of Y on the
// under-reported features: the closed form for beta_hat_1, beta_hat_k and
// alpha_hat when only feature 0 is masked and tail features are uncorrelated.
LinearModel population_biased_params(const MomentSet& ms, const LinearModel& true_model);

// One-dimensional attenuation factor Var(Z) / (E[Z^2] - m E[Z]^2); the
// population slope is factor * beta.
double onedim_attenuation_factor(double mean, double var, double m);

// m -> 0 limit: the omitted-variable form beta_hat_k = beta_1 Cov(Z_k,Z_1)/Var(Z_k)
// + beta_k. The returned model carries coefficient 0 for feature 0, which is
// prediction-equivalent to dropping the feature.
LinearModel omitted_variable_params(const MomentSet& ms, const LinearModel& true_model);

// Tail coefficients via the decomposition beta_k + beta_1*gamma(Z1,Zk)
// - beta_hat_1*gamma(X1,Zk); agrees with population_biased_params for any m
// and is used as an algebraic cross-check.
Eigen::VectorXd tail_params_decomposition(const MomentSet& ms, const LinearModel& true_model);

// Re-expression of correlated tail features as mutually uncorrelated linear
// combinations (Gram-Schmidt via Cholesky of the tail covariance); feature 0
// is left untouched. `forward` maps tail coordinates old -> new; a model fit
// in the new basis maps back with tail_coeffs_old = forward^T * tail_coeffs_new.
struct Orthogonalized {
  MomentSet moments;
  Eigen::VectorXd beta;     // true coefficients re-expressed in the new basis
  Eigen::MatrixXd forward;  // (d-1) x (d-1)
};
Orthogonalized orthogonalize_tail(const MomentSet& ms, const Eigen::VectorXd& beta);

}  // namespace undrep::estimate
