#pragma once

#include <map>
#include <optional>
#include <string>

#include "undrep/types.hpp"

namespace undrep::ingest {

// Column roles for load_csv. The group column is mapped to {0,1} either via
// an explicit value map or, when absent, by requiring numeric 0/1 values.
// Feature columns default to under-reporting-eligible ("continuous or
// count"); list exceptions (e.g. dummy encodings) in `discrete_features`.
struct Schema {
  std::vector<std::string> features;
  std::string group_column;
  std::map<std::string, int> group_map;  // raw value -> {0,1}; empty = already 0/1
  std::string label_column;              // binary classification label; optional
  std::vector<std::string> discrete_features;

  static Schema from_json(const json& j);
  static Schema load(const std::string& path);
};

Dataset load_csv(const std::string& path, const Schema& schema);

// Optional affine map a + b*p applied to fitted probabilities before the
// linear fit (the income-threshold recentering hook); identity by default.
struct Rescale {
  double a = 0.0;
  double b = 1.0;
};

struct SemisyntheticResult {
  Dataset data;            // Y replaced by the linear fitted values
  LinearModel true_model;  // the OLS model generating the new Y exactly
  json logistic_diagnostics;
};

// Builds regression outcomes that are exactly linear in the features: fit a
// logistic regression to the binary label, optionally rescale the fitted
// probabilities, then fit OLS of those probabilities on the same features and
// take its fitted values as the new Y. Deterministic.
SemisyntheticResult make_semisynthetic_outcomes(const Dataset& ds,
                                                std::optional<Rescale> rescale = std::nullopt);

// Adds i.i.d. Gaussian noise with sigma^2 = (1-R^2)/R^2 * Var(alpha+beta'z)
// so an oracle linear model attains the target in-sample R^2. Requires Y to
// equal true_model applied to the features (within 1e-10). target_r2 = 1
// leaves Y untouched. The drawn sigma^2 is recorded in spec.sigma_sq and in
// provenance.
Dataset add_outcome_noise(const Dataset& ds, const LinearModel& true_model, NoiseSpec& spec);

}  // namespace undrep::ingest
