#pragma once

#include <string>
#include <vector>

#include "undrep/types.hpp"

namespace undrep::harness {

inline constexpr const char* kVersion = "0.1.0";

enum class Method {
  plain,
  feature_omission,
  row_omission,
  multiple_imputation,
  augmented_imputation,  // group-dependent augmented loss + optimal imputation
  true_params,
};

Method method_from_string(const std::string& s);
const char* to_string(Method m);

struct ExperimentConfig {
  std::string dataset;             // CSV path
  std::string schema;              // schema JSON path
  std::string outcome_mode = "semisynthetic";  // or "raw"
  std::optional<double> noise_r2;
  std::optional<std::pair<double, double>> rescale;  // a + b*p
  std::vector<std::string> features;  // corruption targets, by name
  std::vector<int> groups;            // group values receiving corruption
  std::vector<double> rates;          // under-reporting rates
  std::vector<Method> methods;
  int reps = 30;
  std::vector<double> C_grid;
  std::uint64_t seed = 0;
  double test_frac = 0.2;
  int mi_draws = 5;
  // Declares Z independent of G: results then carry the over-selected group
  // per the independent-case reading (sign of delta(1) - delta(0)).
  bool z_independent_of_g = false;

  static ExperimentConfig from_json(const json& j);
  static ExperimentConfig load(const std::string& path);
  json to_json() const;
};

struct RunSummary {
  std::size_t n_cells = 0;
  std::size_t n_failed = 0;
  std::string out_dir;

  bool acceptable() const {
    return n_cells == 0 || static_cast<double>(n_failed) <= 0.10 * static_cast<double>(n_cells);
  }
};

// Executes the full stratified experiment grid and writes results.csv,
// params.csv, r2.csv and manifest.json into out_dir. Cells run in parallel
// over `threads` workers; output bytes are independent of thread count.
// Cell failures are recorded in the manifest and do not stop the run.
RunSummary run_experiment(const ExperimentConfig& cfg, const std::string& out_dir, int threads = 1);

}  // namespace undrep::harness
