#include "undrep/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "undrep/dataset_io.hpp"

namespace undrep::fairness {

ThresholdResult threshold_for_rate(const Eigen::Ref<const Eigen::VectorXd>& predictions,
                                   double C) {
  const Eigen::Index n = predictions.size();
  if (n < 1) throw DataError("empty prediction vector");
  if (!(C > 0.0 && C < 1.0)) throw DataError("selection share C must lie in (0,1)");

  ThresholdResult res;
  res.quota = static_cast<Eigen::Index>(std::floor(static_cast<double>(n) * C + 1e-9));
  if (res.quota == 0) {
    res.threshold = std::numeric_limits<double>::infinity();
    return res;
  }

  std::vector<double> v(predictions.data(), predictions.data() + n);
  std::nth_element(v.begin(), v.begin() + (res.quota - 1), v.end(), std::greater<double>());
  res.threshold = v[static_cast<std::size_t>(res.quota - 1)];
  res.selected = (predictions.array() >= res.threshold).count();
  res.tie = res.selected > res.quota;
  return res;
}

std::pair<double, double> selection_rates(const Eigen::Ref<const Eigen::VectorXd>& predictions,
                                          const Eigen::VectorXi& groups, double t) {
  if (predictions.size() != groups.size()) throw DataError("prediction/group length mismatch");
  Eigen::Index n0 = 0, n1 = 0, s0 = 0, s1 = 0;
  for (Eigen::Index i = 0; i < predictions.size(); ++i) {
    if (groups[i] == 1) {
      ++n1;
      if (predictions[i] >= t) ++s1;
    } else {
      ++n0;
      if (predictions[i] >= t) ++s0;
    }
  }
  if (n0 == 0 || n1 == 0) throw DataError("a group is empty; selection rate undefined");
  return {static_cast<double>(s0) / static_cast<double>(n0),
          static_cast<double>(s1) / static_cast<double>(n1)};
}

ExcessSelectionResult excess_selection_rate(const Eigen::Ref<const Eigen::VectorXd>& pred_corrupted,
                                            const Eigen::Ref<const Eigen::VectorXd>& pred_reference,
                                            const Eigen::VectorXi& groups, double C) {
  if (pred_corrupted.size() != pred_reference.size())
    throw DataError("prediction vectors are misaligned");

  const ThresholdResult tc = threshold_for_rate(pred_corrupted, C);
  const ThresholdResult tr = threshold_for_rate(pred_reference, C);
  const auto [c0, c1] = selection_rates(pred_corrupted, groups, tc.threshold);
  const auto [r0, r1] = selection_rates(pred_reference, groups, tr.threshold);

  ExcessSelectionResult out;
  out.C = C;
  out.rate_corrupted_g0 = c0;
  out.rate_corrupted_g1 = c1;
  out.rate_reference_g0 = r0;
  out.rate_reference_g1 = r1;
  out.delta_g0 = c0 - r0;
  out.delta_g1 = c1 - r1;
  out.threshold_corrupted = tc.threshold;
  out.threshold_reference = tr.threshold;
  out.tie_corrupted = tc.tie;
  out.tie_reference = tr.tie;
  // r*delta1 + (1-r)*delta0 telescopes to the selected-count difference.
  out.mass_balance = static_cast<double>(tc.selected - tr.selected) /
                     static_cast<double>(pred_corrupted.size());
  return out;
}

std::vector<ExcessSelectionResult> excess_curve(
    const Eigen::Ref<const Eigen::VectorXd>& pred_corrupted,
    const Eigen::Ref<const Eigen::VectorXd>& pred_reference, const Eigen::VectorXi& groups,
    const std::vector<double>& grid) {
  SelectionPolicy policy;
  policy.C = grid.empty() ? 0.5 : grid.front();
  policy.grid = grid;
  policy.validate();
  std::vector<ExcessSelectionResult> out;
  out.reserve(grid.size());
  for (const double c : grid)
    out.push_back(excess_selection_rate(pred_corrupted, pred_reference, groups, c));
  return out;
}

std::string excess_curve_csv(const std::vector<ExcessSelectionResult>& curve) {
  std::ostringstream os;
  os << "C,group,rate_corrupted,rate_reference,delta,threshold_corrupted,threshold_reference,"
        "tie_flag\n";
  for (const auto& r : curve) {
    for (int g = 0; g < 2; ++g) {
      os << io::format_double(r.C) << ',' << g << ','
         << io::format_double(g ? r.rate_corrupted_g1 : r.rate_corrupted_g0) << ','
         << io::format_double(g ? r.rate_reference_g1 : r.rate_reference_g0) << ','
         << io::format_double(r.delta(g)) << ',' << io::format_double(r.threshold_corrupted) << ','
         << io::format_double(r.threshold_reference) << ',' << (r.tie_corrupted || r.tie_reference)
         << '\n';
    }
  }
  return os.str();
}

}  // namespace undrep::fairness
