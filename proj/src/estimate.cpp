#include "undrep/estimate.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <sstream>

namespace undrep::estimate {

double MomentSet::s_squared() const {
  double s2 = 0.0;
  for (Eigen::Index i = 1; i < d(); ++i) {
    const double rho = sigma(0, i) / std::sqrt(var_z1() * sigma(i, i));
    s2 += rho * rho;
  }
  return s2;
}

double MomentSet::r_squared() const {
  const double vx = var_x1();
  double r2 = 0.0;
  for (Eigen::Index i = 1; i < d(); ++i) {
    const double rho = xi1_mean * sigma(0, i) / std::sqrt(vx * sigma(i, i));
    r2 += rho * rho;
  }
  return r2;
}

void MomentSet::validate() const {
  const Eigen::Index dd = d();
  if (sigma.rows() != dd || sigma.cols() != dd) throw DataError("moment covariance shape != d x d");
  if (!(xi1_mean > 0.0 && xi1_mean <= 1.0))
    throw DataError("reporting rate E[xi_1] must lie in (0,1]");
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw DataError("moment covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    throw DataError("moment covariance is not positive definite");
  for (Eigen::Index i = 1; i < dd; ++i)
    for (Eigen::Index j = i + 1; j < dd; ++j)
      if (std::abs(sigma(i, j)) > 1e-10 * std::sqrt(sigma(i, i) * sigma(j, j)))
        throw DataError("tail features are correlated; orthogonalize first");
}

LinearModel ols_fit(const Eigen::Ref<const Eigen::MatrixXd>& X,
                    const Eigen::Ref<const Eigen::VectorXd>& y, const OlsOptions& opts) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (y.size() != n) throw DataError("design/outcome length mismatch");
  if (n <= d) throw NumericalError("need n > d for least squares (n=" + std::to_string(n) +
                                   ", d=" + std::to_string(d) + ")");

  const Eigen::RowVectorXd mean = X.colwise().mean();
  const Eigen::MatrixXd Xc = X.rowwise() - mean;
  const double y_mean = y.mean();
  const Eigen::VectorXd yc = y.array() - y_mean;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(Xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;
  if (sv.size() == 0 || sv[sv.size() - 1] <= opts.rank_tol * smax) {
    // Name the columns implicated by the null direction.
    std::ostringstream os;
    os << "rank-deficient design (singular values " << (sv.size() ? sv[sv.size() - 1] : 0.0)
       << " vs " << smax << "); near-collinear columns:";
    if (sv.size() > 0) {
      const Eigen::VectorXd null_dir = svd.matrixV().col(sv.size() - 1);
      const double top = null_dir.cwiseAbs().maxCoeff();
      for (Eigen::Index j = 0; j < d; ++j)
        if (std::abs(null_dir[j]) > 0.1 * top) os << " " << j;
    }
    throw NumericalError(os.str());
  }

  LinearModel m;
  m.beta = svd.solve(yc);
  m.alpha = y_mean - mean.dot(m.beta);
  return m;
}

namespace {

void check_model(const MomentSet& ms, const LinearModel& true_model) {
  ms.validate();
  if (true_model.beta.size() != ms.d()) throw DataError("model dimension != moment dimension");
  const double r2 = ms.r_squared();
  if (r2 >= 1.0)
    throw NumericalError("feature 0 is a linear combination of the tail features (R^2 >= 1)");
}

}  // namespace

LinearModel population_biased_params(const MomentSet& ms, const LinearModel& true_model) {
  check_model(ms, true_model);
  const Eigen::Index d = ms.d();
  const double m = ms.xi1_mean;
  const double v1 = ms.var_z1();
  const double vx = ms.var_x1();
  const double beta1 = true_model.beta[0];

  // rho(X_1, Z_1) = m Var(Z_1) / sqrt(Var(X_1) Var(Z_1)).
  const double rho_x1_z1 = m * v1 / std::sqrt(vx * v1);
  double r2 = 0.0;
  double cross = 0.0;  // sum_i rho(X_1,Z_i) rho(Z_1,Z_i)
  for (Eigen::Index i = 1; i < d; ++i) {
    const double rho_x = m * ms.sigma(0, i) / std::sqrt(vx * ms.sigma(i, i));
    const double rho_z = ms.sigma(0, i) / std::sqrt(v1 * ms.sigma(i, i));
    r2 += rho_x * rho_x;
    cross += rho_x * rho_z;
  }
  const double core = rho_x1_z1 - cross;

  LinearModel out;
  out.feature_names = true_model.feature_names;
  out.beta.resize(d);
  out.beta[0] = beta1 / (1.0 - r2) * std::sqrt(v1 / vx) * core;
  for (Eigen::Index k = 1; k < d; ++k) {
    const double rho_zk_z1 = ms.sigma(0, k) / std::sqrt(v1 * ms.sigma(k, k));
    const double rho_x1_zk = m * ms.sigma(0, k) / std::sqrt(vx * ms.sigma(k, k));
    out.beta[k] = beta1 * std::sqrt(v1 / ms.sigma(k, k)) *
                      (rho_zk_z1 - rho_x1_zk * core / (1.0 - r2)) +
                  true_model.beta[k];
  }

  Eigen::VectorXd mean_x = ms.mu;
  mean_x[0] *= m;
  out.alpha = true_model.alpha + ms.mu.dot(true_model.beta) - mean_x.dot(out.beta);
  return out;
}

double onedim_attenuation_factor(double mean, double var, double m) {
  if (!(var > 0.0)) throw DataError("feature variance must be positive");
  if (!(m > 0.0 && m <= 1.0))
    throw NumericalError("reporting rate m must lie in (0,1]; m=0 has zero observed variance");
  const double ez_sq = var + mean * mean;
  return var / (ez_sq - m * mean * mean);
}

LinearModel omitted_variable_params(const MomentSet& ms, const LinearModel& true_model) {
  check_model(ms, true_model);
  const Eigen::Index d = ms.d();
  if (d < 2) throw DataError("omitted-variable form needs at least one tail feature");
  LinearModel out;
  out.feature_names = true_model.feature_names;
  out.beta = Eigen::VectorXd::Zero(d);
  const double beta1 = true_model.beta[0];
  for (Eigen::Index k = 1; k < d; ++k)
    out.beta[k] = beta1 * ms.sigma(0, k) / ms.sigma(k, k) + true_model.beta[k];
  // Intercept of the regression on the surviving features only.
  double tail_mean_dot = 0.0;
  for (Eigen::Index k = 1; k < d; ++k) tail_mean_dot += ms.mu[k] * out.beta[k];
  out.alpha = true_model.alpha + ms.mu.dot(true_model.beta) - tail_mean_dot;
  return out;
}

Eigen::VectorXd tail_params_decomposition(const MomentSet& ms, const LinearModel& true_model) {
  check_model(ms, true_model);
  const Eigen::Index d = ms.d();
  const double beta1 = true_model.beta[0];
  const double beta1_hat = population_biased_params(ms, true_model).beta[0];
  Eigen::VectorXd out(d - 1);
  for (Eigen::Index k = 1; k < d; ++k) {
    const double gamma_z = ms.sigma(0, k) / ms.sigma(k, k);
    const double gamma_x = ms.xi1_mean * ms.sigma(0, k) / ms.sigma(k, k);
    out[k - 1] = true_model.beta[k] + beta1 * gamma_z - beta1_hat * gamma_x;
  }
  return out;
}

Orthogonalized orthogonalize_tail(const MomentSet& ms, const Eigen::VectorXd& beta) {
  const Eigen::Index d = ms.d();
  if (beta.size() != d) throw DataError("beta dimension != moment dimension");
  Orthogonalized out;
  if (d < 2) {
    out.moments = ms;
    out.beta = beta;
    out.forward.resize(0, 0);
    return out;
  }
  const Eigen::MatrixXd tail_cov = ms.sigma.bottomRightCorner(d - 1, d - 1);
  Eigen::LLT<Eigen::MatrixXd> llt(tail_cov);
  if (llt.info() != Eigen::Success)
    throw NumericalError("tail covariance is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  // W = L^-1 Z_tail has identity covariance; solve instead of forming L^-1.
  const Eigen::MatrixXd forward =
      L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(d - 1, d - 1));

  out.forward = forward;
  out.moments.xi1_mean = ms.xi1_mean;
  out.moments.mu.resize(d);
  out.moments.mu[0] = ms.mu[0];
  out.moments.mu.tail(d - 1) = forward * ms.mu.tail(d - 1);
  out.moments.sigma = Eigen::MatrixXd::Identity(d, d);
  out.moments.sigma(0, 0) = ms.sigma(0, 0);
  const Eigen::VectorXd cross = forward * ms.sigma.col(0).tail(d - 1);
  out.moments.sigma.col(0).tail(d - 1) = cross;
  out.moments.sigma.row(0).tail(d - 1) = cross.transpose();
  out.beta.resize(d);
  out.beta[0] = beta[0];
  // beta_tail' Z_tail = (L' beta_tail)' W
  out.beta.tail(d - 1) = L.transpose() * beta.tail(d - 1);
  return out;
}

}  // namespace undrep::estimate
