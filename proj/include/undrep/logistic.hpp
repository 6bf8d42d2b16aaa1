#pragma once

#include "undrep/types.hpp"

namespace undrep {

struct LogisticOptions {
  double tol = 1e-8;        // on the mean score ||X'(y-p)||_inf / n
  int max_iter = 100;
  double ridge_fallback = 1e-6;
  double norm_cap = 1e4;    // L2 cap on (alpha, beta) during plain IRLS
};

struct LogisticFit {
  double alpha = 0.0;
  Eigen::VectorXd beta;
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;
  bool used_ridge = false;  // plain IRLS capped/failed and the ridge run took over
  bool cap_triggered = false;

  Eigen::VectorXd probabilities(const Eigen::Ref<const Eigen::MatrixXd>& X) const {
    Eigen::VectorXd eta = (X * beta).array() + alpha;
    return 1.0 / (1.0 + (-eta.array()).exp());
  }
};

// Maximum-likelihood logistic regression by iteratively reweighted least
// squares. On separable data the coefficient-norm cap stops the diverging
// plain run and the fit restarts with the ridge penalty. Throws
// NumericalError when even the ridge run fails to converge.
LogisticFit fit_logistic(const Eigen::Ref<const Eigen::MatrixXd>& X,
                         const Eigen::Ref<const Eigen::VectorXd>& y01,
                         const LogisticOptions& opts = {});

}  // namespace undrep
