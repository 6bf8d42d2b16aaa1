#include "undrep/theory.hpp"

#include <cmath>

#include "undrep/estimate.hpp"

namespace undrep::theory {

const char* to_string(CaseLabel label) {
  switch (label) {
    case CaseLabel::Case1_overselected: return "Case1_overselected";
    case CaseLabel::Case2_underselected: return "Case2_underselected";
    default: return "Boundary";
  }
}

json TheoryReport::to_json() const {
  json j;
  j["r_squared"] = r_squared;
  j["s_squared"] = s_squared;
  if (turning_point) j["turning_point"] = *turning_point;
  else j["turning_point"] = nullptr;
  j["c"] = c;
  j["q"] = q;
  j["case_label"] = to_string(case_label);
  j["variance_full"] = variance_full;
  j["variance_reduced"] = variance_reduced;
  j["blended_rate"] = blended_rate;
  j["biased_model"] = biased_model.to_json();
  return j;
}

namespace {

double normal_cdf(double x, double mean, double sd) {
  if (sd <= 0.0) return x < mean ? 0.0 : 1.0;  // unit step at the atom
  return 0.5 * std::erfc(-(x - mean) / (sd * 1.4142135623730950488));
}

struct Projections {
  double mean_full, sd_full, mean_reduced, sd_reduced;
};

Projections projections(const LinearModel& model, const GaussianPopulation& pop,
                        Eigen::Index target) {
  if (model.beta.size() != pop.d()) throw DataError("model dimension != population dimension");
  if (target < 0 || target >= pop.d()) throw DataError("target feature index out of range");
  Eigen::VectorXd reduced = model.beta;
  reduced[target] = 0.0;
  Projections p;
  p.mean_full = model.alpha + model.beta.dot(pop.mu);
  p.mean_reduced = model.alpha + reduced.dot(pop.mu);
  p.sd_full = std::sqrt(std::max(0.0, model.beta.dot(pop.sigma * model.beta)));
  p.sd_reduced = std::sqrt(std::max(0.0, reduced.dot(pop.sigma * reduced)));
  return p;
}

}  // namespace

double mixture_cdf(const LinearModel& model, const GaussianPopulation& pop, int g, double x,
                   Eigen::Index target) {
  if (g != 0 && g != 1) throw DataError("group must be 0 or 1");
  pop.validate();
  const Projections p = projections(model, pop, target);
  const double m = (g == 1 ? pop.m1 : pop.m0)[target];
  return (1.0 - m) * normal_cdf(x, p.mean_reduced, p.sd_reduced) +
         m * normal_cdf(x, p.mean_full, p.sd_full);
}

double turning_point(const LinearModel& model, const GaussianPopulation& pop,
                     Eigen::Index target) {
  const Projections p = projections(model, pop, target);
  const double gap = p.sd_reduced - p.sd_full;
  if (std::abs(gap) <= 1e-12 * std::max(1.0, p.sd_full))
    throw NumericalError(
        "turning point undefined: projection sds with and without the feature coincide");
  return p.mean_reduced + p.sd_reduced / gap * model.beta[target] * pop.mu[target];
}

double case_threshold_constant(double var_z1, double mean_z1, double m, double s2) {
  if (!(var_z1 > 0.0)) throw DataError("Var(Z_1) must be positive");
  if (!(m > 0.0 && m <= 1.0)) throw DataError("reporting rate must lie in (0,1]");
  if (!(s2 >= 0.0 && s2 < 1.0)) throw NumericalError("S^2 must lie in [0,1)");
  const double ez_sq = var_z1 + mean_z1 * mean_z1;
  const double num = var_z1 * var_z1 * (1.0 - s2) + 2.0 * (1.0 - m) * ez_sq * var_z1 * s2;
  const double den = 2.0 * var_z1 * (1.0 - s2) * m + 2.0 * (1.0 - m) * ez_sq;
  return num / den;
}

TheoryReport classify_case(const GaussianPopulation& pop, Eigen::Index target_feature) {
  pop.validate();
  const Eigen::Index d = pop.d();
  if (target_feature < 0 || target_feature >= d)
    throw DataError("target feature index out of range");
  if (pop.beta[target_feature] == 0.0)
    throw DataError("beta of the under-reported feature must be nonzero");

  // Permute the target feature to the front.
  std::vector<Eigen::Index> perm;
  perm.push_back(target_feature);
  for (Eigen::Index j = 0; j < d; ++j)
    if (j != target_feature) perm.push_back(j);

  estimate::MomentSet ms;
  ms.mu.resize(d);
  ms.sigma.resize(d, d);
  Eigen::VectorXd beta_p(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    ms.mu[i] = pop.mu[perm[static_cast<std::size_t>(i)]];
    beta_p[i] = pop.beta[perm[static_cast<std::size_t>(i)]];
    for (Eigen::Index j = 0; j < d; ++j)
      ms.sigma(i, j) = pop.sigma(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  ms.xi1_mean = pop.blended_rate(target_feature);

  // Orthogonalize the tail when it is correlated; the closed forms need it.
  bool tails_uncorrelated = true;
  for (Eigen::Index i = 1; i < d && tails_uncorrelated; ++i)
    for (Eigen::Index j = i + 1; j < d; ++j)
      if (std::abs(ms.sigma(i, j)) > 1e-10 * std::sqrt(ms.sigma(i, i) * ms.sigma(j, j))) {
        tails_uncorrelated = false;
        break;
      }
  Eigen::MatrixXd forward;  // tail basis change, when applied
  if (!tails_uncorrelated) {
    auto ortho = estimate::orthogonalize_tail(ms, beta_p);
    forward = ortho.forward;
    ms = std::move(ortho.moments);
    beta_p = std::move(ortho.beta);
  }

  LinearModel truth;
  truth.alpha = pop.alpha;
  truth.beta = beta_p;
  const LinearModel biased = estimate::population_biased_params(ms, truth);

  TheoryReport rep;
  rep.blended_rate = ms.xi1_mean;
  rep.r_squared = ms.r_squared();
  rep.s_squared = ms.s_squared();
  rep.c = case_threshold_constant(ms.var_z1(), ms.mu[0], ms.xi1_mean, rep.s_squared);

  // q = (1/beta_1) sum_j beta_j Cov(Z_1, Z_j); invariant under the tail
  // reparameterization, but computed here in the working basis.
  double cov_sum = 0.0;
  for (Eigen::Index j = 1; j < d; ++j) cov_sum += beta_p[j] * ms.sigma(0, j);
  rep.q = cov_sum / beta_p[0];

  Eigen::VectorXd reduced = biased.beta;
  reduced[0] = 0.0;
  rep.variance_full = biased.beta.dot(ms.sigma * biased.beta);
  rep.variance_reduced = reduced.dot(ms.sigma * reduced);

  const double decision = rep.q + rep.c;  // Case 1 iff decision < 0
  const double var_gap = rep.variance_reduced - rep.variance_full;
  if (std::abs(decision) <= 1e-12) {
    rep.case_label = CaseLabel::Boundary;
  } else {
    rep.case_label = decision < 0.0 ? CaseLabel::Case1_overselected : CaseLabel::Case2_underselected;
    // The two routes are algebraically equivalent; disagreement beyond
    // rounding means the computation went wrong.
    const double band = 1e-9 * (1.0 + std::abs(rep.q) + rep.c);
    const double var_band = 1e-9 * (rep.variance_full + rep.variance_reduced);
    if (std::abs(decision) > band && std::abs(var_gap) > var_band &&
        (decision < 0.0) != (var_gap > 0.0))
      throw NumericalError("classify_case internal inconsistency: variance comparison "
                           "disagrees with the q-vs-threshold comparison");
  }

  // Map the biased estimates back to the original coordinate order.
  LinearModel back;
  back.alpha = biased.alpha;
  Eigen::VectorXd beta_work = biased.beta;
  if (!tails_uncorrelated && d > 1)
    beta_work.tail(d - 1) = forward.transpose() * biased.beta.tail(d - 1);
  back.beta.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) back.beta[perm[static_cast<std::size_t>(i)]] = beta_work[i];
  rep.biased_model = back;

  // Turning point in original coordinates (same scalars either way).
  try {
    rep.turning_point = turning_point(rep.biased_model, pop, target_feature);
  } catch (const NumericalError&) {
    rep.turning_point.reset();
  }
  return rep;
}

}  // namespace undrep::theory
