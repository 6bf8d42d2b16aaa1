#include "undrep/logistic.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace undrep {

namespace {

// One IRLS run at a fixed ridge penalty. Returns false if the run was
// abandoned (cap hit, singular Hessian, non-finite step).
bool irls_run(const Eigen::Ref<const Eigen::MatrixXd>& X,
              const Eigen::Ref<const Eigen::VectorXd>& y, double ridge,
              const LogisticOptions& opts, LogisticFit& fit) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);  // [alpha; beta]

  for (int it = 1; it <= opts.max_iter; ++it) {
    const Eigen::VectorXd eta = (X * theta.tail(d)).array() + theta[0];
    const Eigen::VectorXd p = 1.0 / (1.0 + (-eta.array()).exp());
    const Eigen::VectorXd resid = y - p;

    Eigen::VectorXd grad(d + 1);
    grad[0] = resid.sum();
    grad.tail(d) = X.transpose() * resid;
    grad -= ridge * theta;
    fit.grad_norm = grad.cwiseAbs().maxCoeff() / static_cast<double>(n);
    fit.iterations = it;
    if (fit.grad_norm <= opts.tol) {
      fit.alpha = theta[0];
      fit.beta = theta.tail(d);
      fit.converged = true;
      return true;
    }

    Eigen::VectorXd w = (p.array() * (1.0 - p.array())).max(1e-10);
    Eigen::MatrixXd H(d + 1, d + 1);
    H(0, 0) = w.sum();
    H.block(0, 1, 1, d) = (w.transpose() * X);
    H.block(1, 0, d, 1) = H.block(0, 1, 1, d).transpose();
    H.block(1, 1, d, d) = X.transpose() * w.asDiagonal() * X;
    H.diagonal().array() += ridge;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success) return false;
    const Eigen::VectorXd step = ldlt.solve(grad);
    if (!step.allFinite()) return false;
    theta += step;
    if (theta.norm() > opts.norm_cap) {
      fit.cap_triggered = true;
      return false;
    }
  }
  fit.alpha = theta[0];
  fit.beta = theta.tail(d);
  return false;  // out of iterations
}

}  // namespace

LogisticFit fit_logistic(const Eigen::Ref<const Eigen::MatrixXd>& X,
                         const Eigen::Ref<const Eigen::VectorXd>& y01,
                         const LogisticOptions& opts) {
  if (y01.size() != X.rows()) throw DataError("design/label length mismatch");
  for (Eigen::Index i = 0; i < y01.size(); ++i)
    if (y01[i] != 0.0 && y01[i] != 1.0)
      throw DataError("logistic labels must be 0/1; found " + std::to_string(y01[i]) +
                      " at row " + std::to_string(i));

  LogisticFit fit;
  if (irls_run(X, y01, 0.0, opts, fit)) return fit;

  LogisticFit ridge_fit;
  ridge_fit.cap_triggered = fit.cap_triggered;
  if (irls_run(X, y01, opts.ridge_fallback, opts, ridge_fit)) {
    ridge_fit.used_ridge = true;
    return ridge_fit;
  }
  throw NumericalError("logistic IRLS did not converge after " +
                       std::to_string(ridge_fit.iterations) + " iterations (mean score " +
                       std::to_string(ridge_fit.grad_norm) + ", ridge fallback applied)");
}

}  // namespace undrep
