#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace undrep {

using json = nlohmann::json;

// Bad inputs: files, schemas, shape/domain violations. CLI exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failures: rank deficiency, non-convergence, degenerate moments.
// CLI exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LinearModel {
  double alpha = 0.0;
  Eigen::VectorXd beta;
  std::vector<std::string> feature_names;

  Eigen::Index dim() const { return beta.size(); }

  double predict_row(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return alpha + beta.dot(x);
  }

  Eigen::VectorXd predict(const Eigen::Ref<const Eigen::MatrixXd>& X) const {
    return (X * beta).array() + alpha;
  }

  json to_json() const;
  static LinearModel from_json(const json& j);
};

// Read-only slice of a Dataset that estimators are allowed to see: observed
// features, group labels, outcomes. Latent Z and the masking matrix are not
// reachable through this type.
struct ObservedView {
  const Eigen::MatrixXd& X;
  const Eigen::VectorXi& G;
  const Eigen::VectorXd& Y;
  const std::vector<std::string>& feature_names;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index d() const { return X.cols(); }
};

struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<std::uint8_t> continuous_flags;  // 1 = eligible for under-reporting
  Eigen::MatrixXd X;                           // n x d observed features
  std::optional<Eigen::MatrixXd> Z;            // latent features (synthetic data only)
  Eigen::VectorXi G;                           // n, values in {0,1}
  std::optional<Eigen::VectorXd> Y;
  std::optional<Eigen::MatrixXd> xi_mask;      // n x d in {0,1}; evaluation only
  json provenance = json::object();

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index d() const { return X.cols(); }

  // Estimators must not look at Z or xi_mask; they receive this view.
  ObservedView observed() const {
    if (!Y) throw DataError("dataset has no outcome column");
    return ObservedView{X, G, *Y, feature_names};
  }
};

// Diagnostic only: returns one message per violated invariant, empty when the
// dataset is consistent. Never throws.
std::vector<std::string> validate_dataset(const Dataset& ds);

struct GaussianPopulation {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  double alpha = 0.0;
  Eigen::VectorXd beta;
  double r = 0.5;          // P(G = 1)
  Eigen::VectorXd m0, m1;  // per-feature reporting rates in (0,1]

  Eigen::Index d() const { return mu.size(); }

  // Blended reporting rate E[xi_j] = r*m1_j + (1-r)*m0_j.
  double blended_rate(Eigen::Index j) const { return r * m1[j] + (1.0 - r) * m0[j]; }

  // Throws DataError on shape mismatch, non-symmetric or non-PD sigma
  // (symmetric eigendecomposition, tolerance 1e-10), or rates outside (0,1].
  void validate() const;

  json to_json() const;
  static GaussianPopulation from_json(const json& j);
};

struct UnderReportingConfig {
  Eigen::Index feature_index = 0;
  double rate_g0 = 0.0;  // under-reporting probability, group 0
  double rate_g1 = 0.0;
  std::uint64_t seed = 0;
};

struct SelectionPolicy {
  double C = 0.1;                // overall selection share
  std::vector<double> grid;      // strictly increasing C values for curves

  void validate() const {
    if (!(C > 0.0 && C < 1.0)) throw DataError("selection share C must lie in (0,1)");
    for (std::size_t i = 1; i < grid.size(); ++i)
      if (!(grid[i] > grid[i - 1])) throw DataError("selection grid must be strictly increasing");
    for (double c : grid)
      if (!(c > 0.0 && c < 1.0)) throw DataError("selection grid values must lie in (0,1)");
  }
};

struct ExcessSelectionResult {
  double C = 0.0;
  double delta_g0 = 0.0, delta_g1 = 0.0;
  double rate_corrupted_g0 = 0.0, rate_corrupted_g1 = 0.0;
  double rate_reference_g0 = 0.0, rate_reference_g1 = 0.0;
  double threshold_corrupted = 0.0, threshold_reference = 0.0;
  bool tie_corrupted = false, tie_reference = false;
  // Signed slack of the r*delta1 + (1-r)*delta0 = 0 balance; nonzero only
  // through ties (selected counts differing between the two thresholdings).
  double mass_balance = 0.0;

  double delta(int g) const { return g ? delta_g1 : delta_g0; }
};

struct RateEstimate {
  double m_hat = 1.0;  // clamped to [0,1]
  bool clamped = false;
  std::optional<int> group;
  Eigen::Index n_train = 0;
  Eigen::Index n_eval = 0;  // |P_eval|: evaluation rows with x_target != 0
  json classifier_diagnostics = json::object();
};

struct NoiseSpec {
  double target_r2 = 1.0;   // in (0,1]
  double sigma_sq = -1.0;   // derived; filled by add_outcome_noise
  std::uint64_t seed = 0;
};

}  // namespace undrep
