#include "undrep/mitigate.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <cstring>

#include "undrep/estimate.hpp"
#include "undrep/logistic.hpp"
#include "undrep/rng.hpp"

namespace undrep::mitigate {

namespace {

void check_rates(double m0, double m1) {
  if (!(m0 > 0.0 && m0 <= 1.0 && m1 > 0.0 && m1 <= 1.0))
    throw DataError("reporting rates must lie in (0,1]");
}

void check_target(const ObservedView& v, Eigen::Index target) {
  if (target < 0 || target >= v.d())
    throw DataError("target feature index " + std::to_string(target) + " out of range");
}

}  // namespace

double augmented_loss(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                      double y, double m, Eigen::Index target) {
  if (!(m > 0.0 && m <= 1.0)) throw DataError("reporting rate must lie in (0,1]");
  if (target < 0 || target >= model.beta.size()) throw DataError("target index out of range");
  const double pred = model.predict_row(x);
  const double pred0 = pred - model.beta[target] * x[target];
  const double l = (pred - y) * (pred - y);
  const double l0 = (pred0 - y) * (pred0 - y);
  return l / m - (1.0 - m) / m * l0;
}

AugmentedFitReport augmented_fit(const ObservedView& train, Eigen::Index target, double m0_hat,
                                 double m1_hat, RateMode mode) {
  check_rates(m0_hat, m1_hat);
  check_target(train, target);
  const Eigen::Index n = train.n();
  const Eigen::Index d = train.d();
  if (n <= d) throw NumericalError("need n > d to fit");

  AugmentedFitReport rep;
  rep.rate_g0 = m0_hat;
  rep.rate_g1 = m1_hat;
  rep.mode = mode;

  if (m0_hat == 1.0 && m1_hat == 1.0) {
    rep.model = estimate::ols_fit(train.X, train.Y);
    rep.model.feature_names = train.feature_names;
    return rep;
  }

  const double r_hat = train.G.cast<double>().mean();
  const double blended = r_hat * m1_hat + (1.0 - r_hat) * m0_hat;

  // Quadratic objective: H theta = b with extended rows a = [1, x] and
  // feature-zeroed rows a0. Weights w = 1/m, v = (1-m)/m per row.
  const Eigen::Index p = d + 1;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd a(p), a0(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = mode == RateMode::group_blind ? blended
                                                   : (train.G[i] == 1 ? m1_hat : m0_hat);
    const double w = 1.0 / m;
    const double v = (1.0 - m) / m;
    a[0] = 1.0;
    a.tail(d) = train.X.row(i).transpose();
    a0 = a;
    a0[target + 1] = 0.0;
    const double y = train.Y[i];
    H.selfadjointView<Eigen::Lower>().rankUpdate(a, w);
    H.selfadjointView<Eigen::Lower>().rankUpdate(a0, -v);
    b += (w * y) * a - (v * y) * a0;
  }
  H = H.selfadjointView<Eigen::Lower>();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of the Hessian failed");
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  rep.hessian_definite = lmin > 1e-8 * std::max(lmax, 0.0);

  Eigen::VectorXd theta;
  if (rep.hessian_definite) {
    theta = Eigen::LDLT<Eigen::MatrixXd>(H).solve(b);
  } else {
    rep.fallback_ridge = 1e-4 * H.trace() / static_cast<double>(p);
    Eigen::MatrixXd Hr = H;
    Hr.diagonal().array() += rep.fallback_ridge;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Hr);
    if (!lu.isInvertible()) throw NumericalError("augmented-loss system singular after ridge");
    theta = lu.solve(b);
  }
  if (!theta.allFinite()) throw NumericalError("augmented-loss solve produced non-finite values");

  rep.model.alpha = theta[0];
  rep.model.beta = theta.tail(d);
  rep.model.feature_names = train.feature_names;
  return rep;
}

namespace {

std::optional<double> imputation_value(const Eigen::VectorXd& col, double m) {
  const Eigen::Index n = col.size();
  if (n == 0) return std::nullopt;
  Eigen::Index n_zero = 0;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (col[i] == 0.0) ++n_zero;
    else sum += col[i];
  }
  if (n_zero == 0) return std::nullopt;  // nothing would ever be imputed
  const double mean_all = sum / static_cast<double>(n);
  const double p_nonzero = static_cast<double>(n - n_zero) / static_cast<double>(n);
  const double p_zero = static_cast<double>(n_zero) / static_cast<double>(n);
  const double mean_nonzero = n_zero == n ? 0.0 : sum / static_cast<double>(n - n_zero);
  return (mean_all / m - p_nonzero * mean_nonzero) / p_zero;
}

}  // namespace

ImputationValues optimal_imputation_values(const ObservedView& train, Eigen::Index target,
                                           double m0_hat, double m1_hat, RateMode mode) {
  check_rates(m0_hat, m1_hat);
  check_target(train, target);
  ImputationValues out;
  out.mode = mode;
  if (mode == RateMode::group_blind) {
    const double r_hat = train.G.cast<double>().mean();
    out.blind = imputation_value(train.X.col(target), r_hat * m1_hat + (1.0 - r_hat) * m0_hat);
    return out;
  }
  for (int g = 0; g < 2; ++g) {
    std::vector<double> vals;
    for (Eigen::Index i = 0; i < train.n(); ++i)
      if (train.G[i] == g) vals.push_back(train.X(i, target));
    const Eigen::VectorXd col =
        Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    const auto v = imputation_value(col, g == 1 ? m1_hat : m0_hat);
    (g == 1 ? out.g1 : out.g0) = v;
  }
  return out;
}

double predict_with_imputation(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                               std::optional<int> g, const ImputationValues& vals,
                               Eigen::Index target) {
  if (target < 0 || target >= model.beta.size()) throw DataError("target index out of range");
  if (x[target] != 0.0) return model.predict_row(x);

  std::optional<double> value;
  if (vals.mode == RateMode::group_blind) {
    if (g) throw DataError("group value supplied but imputation values are group-blind");
    value = vals.blind;
  } else {
    if (!g) throw DataError("group-dependent imputation values need a group value");
    value = *g == 1 ? vals.g1 : vals.g0;
  }
  if (!value) return model.predict_row(x);  // no-op marker: nothing was imputable at fit time
  return model.predict_row(x) + model.beta[target] * (*value);
}

Eigen::VectorXd predict_with_imputation(const LinearModel& model,
                                        const Eigen::Ref<const Eigen::MatrixXd>& X,
                                        const Eigen::VectorXi& groups,
                                        const ImputationValues& vals, Eigen::Index target) {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const std::optional<int> g = vals.mode == RateMode::group_dependent
                                     ? std::optional<int>(groups[i])
                                     : std::nullopt;
    out[i] = predict_with_imputation(model, X.row(i).transpose(), g, vals, target);
  }
  return out;
}

namespace {

class LogisticClassifier final : public BinaryClassifier {
 public:
  void fit(const Eigen::Ref<const Eigen::MatrixXd>& X,
           const Eigen::Ref<const Eigen::VectorXd>& y01) override {
    fit_ = fit_logistic(X, y01);
  }
  Eigen::VectorXd predict_proba(const Eigen::Ref<const Eigen::MatrixXd>& X) const override {
    return fit_.probabilities(X);
  }
  std::string name() const override { return "logistic_irls"; }

 private:
  LogisticFit fit_;
};

std::uint64_t hash_row(std::uint64_t seed, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                       double y) {
  std::uint64_t h = rng::mix64(seed + rng::kGolden);
  auto absorb = [&h](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    h = rng::mix64(h ^ (bits + rng::kGolden));
  };
  for (Eigen::Index j = 0; j < x.size(); ++j) absorb(x[j]);
  absorb(y);
  return h;
}

Eigen::MatrixXd drop_column(const Eigen::Ref<const Eigen::MatrixXd>& X, Eigen::Index target) {
  Eigen::MatrixXd out(X.rows(), X.cols() - 1);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (j == target) continue;
    out.col(k++) = X.col(j);
  }
  return out;
}

}  // namespace

std::unique_ptr<BinaryClassifier> make_logistic_classifier() {
  return std::make_unique<LogisticClassifier>();
}

RateEstimate estimate_reporting_rate(const ObservedView& data, Eigen::Index target,
                                     std::optional<int> group, BinaryClassifier& classifier,
                                     std::uint64_t split_seed) {
  check_target(data, target);
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < data.n(); ++i)
    if (!group || data.G[i] == *group) rows.push_back(i);
  if (rows.empty()) throw DataError("no rows in the requested group");

  // 50/50 split keyed by row content so the estimate is row-order invariant;
  // rows are then processed in hash order, which makes the result bit-identical
  // under any permutation of the input.
  std::vector<std::pair<std::uint64_t, Eigen::Index>> train_keyed, eval_keyed;
  for (const Eigen::Index r : rows) {
    const std::uint64_t h = hash_row(split_seed, data.X.row(r), data.Y[r]);
    (h & 1 ? train_keyed : eval_keyed).emplace_back(h, r);
  }
  if (train_keyed.empty() || eval_keyed.empty())
    throw DataError("degenerate 50/50 split (too few rows)");
  std::sort(train_keyed.begin(), train_keyed.end());
  std::sort(eval_keyed.begin(), eval_keyed.end());
  std::vector<Eigen::Index> train_rows, eval_rows;
  for (const auto& [h, r] : train_keyed) train_rows.push_back(r);
  for (const auto& [h, r] : eval_keyed) eval_rows.push_back(r);

  const Eigen::Index q = data.d();  // classifier sees d-1 features plus Y
  auto build = [&](const std::vector<Eigen::Index>& rs, Eigen::MatrixXd& M, Eigen::VectorXd& lab) {
    M.resize(static_cast<Eigen::Index>(rs.size()), q);
    lab.resize(static_cast<Eigen::Index>(rs.size()));
    for (std::size_t i = 0; i < rs.size(); ++i) {
      const Eigen::Index r = rs[i];
      Eigen::Index k = 0;
      for (Eigen::Index j = 0; j < data.d(); ++j) {
        if (j == target) continue;
        M(static_cast<Eigen::Index>(i), k++) = data.X(r, j);
      }
      M(static_cast<Eigen::Index>(i), q - 1) = data.Y[r];
      lab[static_cast<Eigen::Index>(i)] = data.X(r, target) != 0.0 ? 1.0 : 0.0;
    }
  };

  Eigen::MatrixXd Mtrain, Meval;
  Eigen::VectorXd ytrain, yeval;
  build(train_rows, Mtrain, ytrain);
  build(eval_rows, Meval, yeval);

  classifier.fit(Mtrain, ytrain);

  std::vector<Eigen::Index> eval_pos;
  for (Eigen::Index i = 0; i < yeval.size(); ++i)
    if (yeval[i] == 1.0) eval_pos.push_back(i);
  if (eval_pos.empty()) throw DataError("P_eval is empty: no nonzero target entries to average over");

  const Eigen::VectorXd h_eval = classifier.predict_proba(Meval);
  double sum = 0.0;
  for (const Eigen::Index i : eval_pos) sum += h_eval[i];
  const double raw = sum / static_cast<double>(eval_pos.size());

  RateEstimate est;
  est.group = group;
  est.n_train = static_cast<Eigen::Index>(train_rows.size());
  est.n_eval = static_cast<Eigen::Index>(eval_pos.size());
  est.m_hat = std::clamp(raw, 0.0, 1.0);
  est.clamped = raw != est.m_hat;
  est.classifier_diagnostics = {
      {"classifier", classifier.name()},
      {"raw_estimate", raw},
      {"train_positive_share", ytrain.mean()},
      {"eval_rows", static_cast<Eigen::Index>(eval_rows.size())},
      {"mean_h_eval", h_eval.mean()}};
  return est;
}

LinearModel baseline_feature_omission(const ObservedView& train, Eigen::Index target) {
  check_target(train, target);
  if (train.d() < 2) throw DataError("feature omission leaves no features (d=1)");
  const Eigen::MatrixXd rest = drop_column(train.X, target);
  const LinearModel fit = estimate::ols_fit(rest, train.Y);
  LinearModel out;
  out.alpha = fit.alpha;
  out.feature_names = train.feature_names;
  out.beta = Eigen::VectorXd::Zero(train.d());
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < train.d(); ++j) {
    if (j == target) continue;
    out.beta[j] = fit.beta[k++];
  }
  return out;
}

LinearModel baseline_row_omission(const ObservedView& train, Eigen::Index target) {
  check_target(train, target);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < train.n(); ++i)
    if (train.X(i, target) != 0.0) keep.push_back(i);
  if (static_cast<Eigen::Index>(keep.size()) <= train.d())
    throw NumericalError("too few rows with a nonzero target entry (" +
                         std::to_string(keep.size()) + ") to fit d=" + std::to_string(train.d()) +
                         " features");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(keep.size()), train.d());
  Eigen::VectorXd y(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) = train.X.row(keep[i]);
    y[static_cast<Eigen::Index>(i)] = train.Y[keep[i]];
  }
  LinearModel m = estimate::ols_fit(X, y);
  m.feature_names = train.feature_names;
  return m;
}

LinearModel MultipleImputationModel::mean_model() const {
  LinearModel out;
  if (models.empty()) return out;
  out = models[0];
  for (std::size_t k = 1; k < models.size(); ++k) {
    out.alpha += models[k].alpha;
    out.beta += models[k].beta;
  }
  out.alpha /= static_cast<double>(models.size());
  out.beta /= static_cast<double>(models.size());
  return out;
}

Eigen::VectorXd MultipleImputationModel::predict(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                                 std::uint64_t row_offset) const {
  if (models.empty()) throw DataError("multiple-imputation model has no draws");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(X.rows());
  const Eigen::MatrixXd rest = drop_column(X, target);
  const Eigen::VectorXd cond_mean = conditional.predict(rest);
  for (std::size_t k = 0; k < models.size(); ++k) {
    const std::uint64_t run_seed = rng::derive_seed(seed, static_cast<std::uint64_t>(k));
    Eigen::MatrixXd Xi = X;
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      if (X(i, target) == 0.0)
        Xi(i, target) = cond_mean[i] + residual_sd * rng::cell_gaussian(
                                           run_seed, row_offset + static_cast<std::uint64_t>(i), 1);
    acc += models[k].predict(Xi);
  }
  return acc / static_cast<double>(models.size());
}

MultipleImputationModel baseline_multiple_imputation(const ObservedView& train,
                                                     Eigen::Index target, int n_draws,
                                                     std::uint64_t seed) {
  check_target(train, target);
  if (n_draws < 1) throw DataError("need at least one imputation draw");
  std::vector<Eigen::Index> nz;
  for (Eigen::Index i = 0; i < train.n(); ++i)
    if (train.X(i, target) != 0.0) nz.push_back(i);
  if (static_cast<Eigen::Index>(nz.size()) <= train.d())
    throw NumericalError("too few rows with a nonzero target entry to fit the conditional");

  Eigen::MatrixXd Xnz(static_cast<Eigen::Index>(nz.size()), train.d() - 1);
  Eigen::VectorXd tnz(static_cast<Eigen::Index>(nz.size()));
  for (std::size_t i = 0; i < nz.size(); ++i) {
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < train.d(); ++j) {
      if (j == target) continue;
      Xnz(static_cast<Eigen::Index>(i), k++) = train.X(nz[i], j);
    }
    tnz[static_cast<Eigen::Index>(i)] = train.X(nz[i], target);
  }

  MultipleImputationModel mi;
  mi.target = target;
  mi.seed = seed;
  mi.conditional = estimate::ols_fit(Xnz, tnz);
  const Eigen::VectorXd resid = tnz - mi.conditional.predict(Xnz);
  const auto dof = static_cast<double>(static_cast<Eigen::Index>(nz.size()) - train.d());
  const double var = std::max(resid.squaredNorm() / dof, 1e-12);
  mi.residual_sd = std::sqrt(var);

  const Eigen::MatrixXd rest = drop_column(train.X, target);
  const Eigen::VectorXd cond_mean = mi.conditional.predict(rest);
  for (int k = 0; k < n_draws; ++k) {
    const std::uint64_t run_seed = rng::derive_seed(seed, static_cast<std::uint64_t>(k));
    Eigen::MatrixXd Xi = train.X;
    for (Eigen::Index i = 0; i < train.n(); ++i)
      if (train.X(i, target) == 0.0)
        Xi(i, target) =
            cond_mean[i] + mi.residual_sd * rng::cell_gaussian(run_seed,
                                                               static_cast<std::uint64_t>(i), 0);
    LinearModel m = estimate::ols_fit(Xi, train.Y);
    m.feature_names = train.feature_names;
    mi.models.push_back(std::move(m));
  }
  return mi;
}

}  // namespace undrep::mitigate
