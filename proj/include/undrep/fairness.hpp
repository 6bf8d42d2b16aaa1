#pragma once

#include "undrep/types.hpp"

namespace undrep::fairness {

struct ThresholdResult {
  double threshold = 0.0;        // +inf when floor(n*C) == 0
  Eigen::Index selected = 0;     // count of predictions >= threshold
  Eigen::Index quota = 0;        // floor(n*C)
  bool tie = false;              // selected > quota, only possible through ties
};

// Smallest observed value t with #(pred >= t) <= floor(n*C) absent ties;
// ties at t are all selected and flagged.
ThresholdResult threshold_for_rate(const Eigen::Ref<const Eigen::VectorXd>& predictions, double C);

// Fraction of predictions >= t per group; throws on an empty group.
std::pair<double, double> selection_rates(const Eigen::Ref<const Eigen::VectorXd>& predictions,
                                          const Eigen::VectorXi& groups, double t);

// Delta(g, C): group-g selection rate under the corrupted-model ranking minus
// the rate under the reference-model ranking, thresholds derived at share C
// from each prediction vector separately.
ExcessSelectionResult excess_selection_rate(const Eigen::Ref<const Eigen::VectorXd>& pred_corrupted,
                                            const Eigen::Ref<const Eigen::VectorXd>& pred_reference,
                                            const Eigen::VectorXi& groups, double C);

std::vector<ExcessSelectionResult> excess_curve(
    const Eigen::Ref<const Eigen::VectorXd>& pred_corrupted,
    const Eigen::Ref<const Eigen::VectorXd>& pred_reference, const Eigen::VectorXi& groups,
    const std::vector<double>& grid);

// Long-format CSV rows: C, group, rate_corrupted, rate_reference, delta,
// threshold_corrupted, threshold_reference, tie_flag.
std::string excess_curve_csv(const std::vector<ExcessSelectionResult>& curve);

}  // namespace undrep::fairness
