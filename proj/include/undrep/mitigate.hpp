#pragma once

#include <memory>
#include <optional>

#include "undrep/types.hpp"

namespace undrep::mitigate {

enum class RateMode { group_blind, group_dependent };

struct AugmentedFitReport {
  LinearModel model;
  bool hessian_definite = true;
  double fallback_ridge = 0.0;  // > 0 iff hessian_definite is false
  double rate_g0 = 1.0, rate_g1 = 1.0;
  RateMode mode = RateMode::group_dependent;
};

// The reweighted two-term squared-error loss whose masking-expectation equals
// the clean-feature loss: l(x)/m - (1-m)/m * l(x with the target zeroed).
double augmented_loss(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                      double y, double m, Eigen::Index target = 0);

// Minimizes the empirical augmented loss over linear models. The objective is
// quadratic; the stationary system is solved directly when its Hessian is
// positive definite, otherwise with a ridge shift (flagged). Group-dependent
// mode weights each row by its group's rate; group-blind mode uses the
// prevalence-blended rate. With both rates equal to 1 this is exactly OLS.
AugmentedFitReport augmented_fit(const ObservedView& train, Eigen::Index target, double m0_hat,
                                 double m1_hat, RateMode mode = RateMode::group_dependent);

struct ImputationValues {
  std::optional<double> blind;
  std::optional<double> g0, g1;
  RateMode mode = RateMode::group_dependent;

  bool empty() const { return !blind && !g0 && !g1; }
};

// Plug-in estimate of E[Z_1 | X_1 = 0] (per group in group mode):
// ((1/m) mean(X_1) - P(X_1 != 0) mean(X_1 | X_1 != 0)) / P(X_1 = 0).
// A (sub)population without zero entries gets no value (nothing to impute).
ImputationValues optimal_imputation_values(const ObservedView& train, Eigen::Index target,
                                           double m0_hat, double m1_hat,
                                           RateMode mode = RateMode::group_dependent);

// Substitutes the imputation value into the target feature iff it reads 0,
// then applies the model. `g` must be given in group mode.
double predict_with_imputation(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                               std::optional<int> g, const ImputationValues& vals,
                               Eigen::Index target = 0);

Eigen::VectorXd predict_with_imputation(const LinearModel& model,
                                        const Eigen::Ref<const Eigen::MatrixXd>& X,
                                        const Eigen::VectorXi& groups,
                                        const ImputationValues& vals, Eigen::Index target = 0);

// Pluggable probability model for the reporting-rate estimator.
class BinaryClassifier {
 public:
  virtual ~BinaryClassifier() = default;
  virtual void fit(const Eigen::Ref<const Eigen::MatrixXd>& X,
                   const Eigen::Ref<const Eigen::VectorXd>& y01) = 0;
  virtual Eigen::VectorXd predict_proba(const Eigen::Ref<const Eigen::MatrixXd>& X) const = 0;
  virtual std::string name() const = 0;
};

std::unique_ptr<BinaryClassifier> make_logistic_classifier();

// PU-style estimate of the reporting rate m: split the (group-restricted)
// rows 50/50 by content hash, fit h predicting 1{X_target != 0} from the
// remaining features and Y on one half, and average h over the other half's
// rows with X_target != 0. Estimates are clamped to [0,1] with a flag.
RateEstimate estimate_reporting_rate(const ObservedView& data, Eigen::Index target,
                                     std::optional<int> group, BinaryClassifier& classifier,
                                     std::uint64_t split_seed);

// Standard missing-data baselines.
LinearModel baseline_feature_omission(const ObservedView& train, Eigen::Index target);
LinearModel baseline_row_omission(const ObservedView& train, Eigen::Index target);

struct MultipleImputationModel {
  std::vector<LinearModel> models;   // one per draw
  LinearModel conditional;           // X_target ~ rest, fit on nonzero rows
  double residual_sd = 0.0;
  Eigen::Index target = 0;
  std::uint64_t seed = 0;

  // Mean coefficients across the ensemble (reporting convenience).
  LinearModel mean_model() const;

  // Imputes each zero entry with a fresh posterior draw per run and averages
  // the per-run predictions. `row_offset` keys test-row draws apart from any
  // other use of the same seed.
  Eigen::VectorXd predict(const Eigen::Ref<const Eigen::MatrixXd>& X,
                          std::uint64_t row_offset = 0) const;
};

// Fits the linear-Gaussian conditional of the target feature on the remaining
// features using rows with a nonzero target, then builds an ensemble of OLS
// fits on independently imputed copies of the training data.
MultipleImputationModel baseline_multiple_imputation(const ObservedView& train,
                                                     Eigen::Index target, int n_draws,
                                                     std::uint64_t seed);

}  // namespace undrep::mitigate
