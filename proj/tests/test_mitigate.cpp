#include <cmath>

#include "doctest.h"
#include "support.hpp"
#include "undrep/corrupt.hpp"
#include "undrep/estimate.hpp"
#include "undrep/mitigate.hpp"

using namespace undrep;
using mitigate::RateMode;

namespace {

LinearModel identity_1d() {
  LinearModel f;
  f.alpha = 0.0;
  f.beta = Eigen::VectorXd::Constant(1, 1.0);
  return f;
}

// Constant-probability stub used for the oracle-classifier example.
class ConstantClassifier final : public mitigate::BinaryClassifier {
 public:
  explicit ConstantClassifier(double p) : p_(p) {}
  void fit(const Eigen::Ref<const Eigen::MatrixXd>&,
           const Eigen::Ref<const Eigen::VectorXd>&) override {}
  Eigen::VectorXd predict_proba(const Eigen::Ref<const Eigen::MatrixXd>& X) const override {
    return Eigen::VectorXd::Constant(X.rows(), p_);
  }
  std::string name() const override { return "constant"; }

 private:
  double p_;
};

Dataset zero_inflated_dataset(Eigen::Index n, std::uint64_t seed, double p_nonzero = 0.55,
                              double y_noise = 0.0) {
  rng::SplitMix64 gen(seed);
  Dataset ds;
  ds.feature_names = {"count_feature", "background"};
  ds.continuous_flags = {1, 1};
  ds.X.resize(n, 2);
  ds.G.resize(n);
  ds.Y.emplace(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z2 = gen.next_gaussian();
    const bool nonzero = gen.next_unit() < p_nonzero;
    const double z1 = nonzero ? 2.0 + 0.8 * z2 + 0.6 * gen.next_gaussian() : 0.0;
    ds.X(i, 0) = z1;
    ds.X(i, 1) = z2;
    ds.G[i] = gen.next_unit() < 0.5 ? 1 : 0;
    (*ds.Y)[i] = z1 + z2 + y_noise * gen.next_gaussian();
  }
  return ds;
}

}  // namespace

TEST_SUITE("mitigate") {

TEST_CASE("augmented loss hand example and collapses") {
  const LinearModel f = identity_1d();
  Eigen::VectorXd x(1);

  // observed x = z = 2, y = 2, m = 0.5
  x << 2.0;
  CHECK(mitigate::augmented_loss(f, x, 2.0, 0.5) == doctest::Approx(-4.0));
  // masked x = 0
  x << 0.0;
  CHECK(mitigate::augmented_loss(f, x, 2.0, 0.5) == doctest::Approx(4.0));
  // the xi-average reproduces the clean loss (= 0 here)
  CHECK(0.5 * -4.0 + 0.5 * 4.0 == doctest::Approx(0.0));

  // m = 1 reduces to plain squared error
  x << 1.5;
  CHECK(mitigate::augmented_loss(f, x, 0.5, 1.0) == doctest::Approx(1.0));

  // x_1 = 0 collapses both terms onto the zeroed row
  LinearModel g;
  g.alpha = 0.3;
  g.beta = Eigen::Vector2d(2.0, -1.0);
  Eigen::VectorXd x2(2);
  x2 << 0.0, 1.0;
  const double plain = std::pow(g.predict_row(x2) - 0.2, 2);
  CHECK(mitigate::augmented_loss(g, x2, 0.2, 0.37) == doctest::Approx(plain));

  CHECK_THROWS_AS(mitigate::augmented_loss(f, x, 0.0, 0.0), DataError);
}

TEST_CASE("augmented loss is unbiased under the masking expectation (property)") {
  rng::SplitMix64 gen(55);
  for (int rep = 0; rep < 1000; ++rep) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(gen.next_below(4));
    LinearModel f;
    f.alpha = gen.next_gaussian();
    f.beta.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) f.beta[j] = gen.next_gaussian();
    Eigen::VectorXd z(d);
    for (Eigen::Index j = 0; j < d; ++j) z[j] = gen.next_gaussian();
    const double y = gen.next_gaussian();
    const double m = 0.05 + 0.95 * gen.next_unit();

    Eigen::VectorXd z0 = z;
    z0[0] = 0.0;
    const double expect =
        m * mitigate::augmented_loss(f, z, y, m) + (1.0 - m) * mitigate::augmented_loss(f, z0, y, m);
    const double clean = std::pow(f.predict_row(z) - y, 2);
    REQUIRE(std::abs(expect - clean) < 1e-12 * std::max(1.0, std::abs(clean)));
  }
}

TEST_CASE("augmented fit with full reporting equals OLS bit for bit") {
  const auto pop = testsup::example_population();
  const Dataset ds = testsup::sample_population(pop, 500, 21);
  const auto view = ds.observed();
  const auto rep = mitigate::augmented_fit(view, 0, 1.0, 1.0);
  const LinearModel ols = estimate::ols_fit(view.X, view.Y);
  CHECK(rep.model.alpha == ols.alpha);
  CHECK(rep.model.beta == ols.beta);
  CHECK(rep.hessian_definite);
  CHECK(rep.fallback_ridge == 0.0);
}

TEST_CASE("augmented fit with true rates recovers the generator") {
  GaussianPopulation pop;
  pop.mu = Eigen::Vector3d(1.0, 0.0, -0.5);
  pop.sigma = Eigen::Matrix3d{{1.0, 0.4, 0.2}, {0.4, 1.0, 0.1}, {0.2, 0.1, 1.0}};
  pop.alpha = 0.7;
  pop.beta = Eigen::Vector3d(1.0, 2.0, -1.0);
  pop.r = 0.5;
  pop.m0 = Eigen::Vector3d::Ones();
  pop.m1 = Eigen::Vector3d::Ones();
  pop.m1[0] = 0.6;  // 40% under-reporting in group 1

  for (std::uint64_t seed : {100, 101, 102}) {
    const Dataset ds = testsup::sample_population(pop, 100000, seed);
    const auto rep = mitigate::augmented_fit(ds.observed(), 0, 1.0, 0.6, RateMode::group_dependent);
    CHECK((rep.model.beta - pop.beta).cwiseAbs().maxCoeff() < 0.03);
    CHECK(std::abs(rep.model.alpha - pop.alpha) < 0.03);
  }
}

TEST_CASE("group-blind augmented fit uses the blended rate") {
  auto pop = testsup::example_population();
  pop.m0[0] = 0.4;
  pop.m1[0] = 0.8;  // blended 0.6 at r = 0.5
  const Dataset ds = testsup::sample_population(pop, 100000, 3030);
  const auto rep = mitigate::augmented_fit(ds.observed(), 0, 0.4, 0.8, RateMode::group_blind);
  CHECK((rep.model.beta - pop.beta).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("indefinite Hessian triggers the ridge fallback") {
  // Small sample, heavy masking, large |z| rows: hunt for an indefinite case.
  rng::SplitMix64 gen(9001);
  bool found = false;
  for (int attempt = 0; attempt < 2000 && !found; ++attempt) {
    const Eigen::Index n = 20;
    Dataset ds;
    ds.feature_names = {"f0", "f1"};
    ds.continuous_flags = {1, 1};
    ds.X.resize(n, 2);
    ds.G = Eigen::VectorXi::Zero(n);
    ds.Y.emplace(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z1 = 3.0 * gen.next_gaussian();
      const double z2 = gen.next_gaussian();
      const bool masked = gen.next_unit() < 0.75;
      ds.X(i, 0) = masked ? 0.0 : z1;
      ds.X(i, 1) = z2;
      (*ds.Y)[i] = z1 + z2;
    }
    try {
      const auto rep = mitigate::augmented_fit(ds.observed(), 0, 0.25, 0.25);
      if (!rep.hessian_definite) {
        found = true;
        CHECK(rep.fallback_ridge > 0.0);
        CHECK(rep.model.beta.allFinite());
      }
    } catch (const NumericalError&) {
      // singular even after ridge: acceptable on adversarial draws
    }
  }
  CHECK(found);
}

TEST_CASE("augmented fit rejects invalid rates") {
  const Dataset ds = testsup::sample_population(testsup::example_population(), 50, 3);
  CHECK_THROWS_AS(mitigate::augmented_fit(ds.observed(), 0, 0.0, 1.0), DataError);
  CHECK_THROWS_AS(mitigate::augmented_fit(ds.observed(), 0, 0.5, 1.1), DataError);
}

TEST_CASE("optimal imputation value: binary feature enumeration") {
  // Z_1 ~ Bern(0.5), m = 0.5: E[Z_1 | X_1 = 0] = 1/3.
  const Eigen::Index n = 100000;
  rng::SplitMix64 gen(77);
  Dataset ds;
  ds.feature_names = {"b"};
  ds.continuous_flags = {1};
  ds.X.resize(n, 1);
  ds.G = Eigen::VectorXi::Zero(n);
  ds.Y.emplace(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = gen.next_unit() < 0.5 ? 1.0 : 0.0;
    const double xi = gen.next_unit() < 0.5 ? 1.0 : 0.0;
    ds.X(i, 0) = z * xi;
    (*ds.Y)[i] = z;
  }
  const auto vals = mitigate::optimal_imputation_values(ds.observed(), 0, 0.5, 0.5,
                                                        RateMode::group_blind);
  REQUIRE(vals.blind.has_value());
  CHECK(*vals.blind == doctest::Approx(1.0 / 3.0).epsilon(0.03));
}

TEST_CASE("optimal imputation value: continuous feature converges to its mean") {
  auto pop = testsup::example_population(0.5, 1.0, 1.0, 0.6, 1.5);  // mean 1.5, no true zeros
  pop.m0[0] = pop.m1[0] = 0.6;
  const Dataset ds = testsup::sample_population(pop, 200000, 31);
  const auto vals =
      mitigate::optimal_imputation_values(ds.observed(), 0, 0.6, 0.6, RateMode::group_dependent);
  REQUIRE(vals.g0.has_value());
  REQUIRE(vals.g1.has_value());
  CHECK(*vals.g0 == doctest::Approx(1.5).epsilon(0.02));
  CHECK(*vals.g1 == doctest::Approx(1.5).epsilon(0.02));
}

TEST_CASE("optimal imputation value: m=1 with true zeros gives 0") {
  Dataset ds;
  ds.feature_names = {"c"};
  ds.continuous_flags = {1};
  ds.X.resize(6, 1);
  ds.X << 0.0, 2.0, 0.0, 4.0, 6.0, 0.0;
  ds.G = Eigen::VectorXi::Zero(6);
  ds.Y = Eigen::VectorXd::Zero(6);
  const auto vals =
      mitigate::optimal_imputation_values(ds.observed(), 0, 1.0, 1.0, RateMode::group_blind);
  REQUIRE(vals.blind.has_value());
  CHECK(*vals.blind == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("optimal imputation value: no zero entries yields a no-op marker") {
  Dataset ds;
  ds.feature_names = {"c"};
  ds.continuous_flags = {1};
  ds.X = Eigen::MatrixXd::Constant(5, 1, 2.0);
  ds.G = Eigen::VectorXi::Zero(5);
  ds.Y = Eigen::VectorXd::Zero(5);
  const auto vals =
      mitigate::optimal_imputation_values(ds.observed(), 0, 0.8, 0.8, RateMode::group_blind);
  CHECK(!vals.blind.has_value());
}

TEST_CASE("predict with imputation substitutes only at zero") {
  LinearModel f;
  f.alpha = 0.5;
  f.beta = Eigen::Vector2d(2.0, 1.0);
  mitigate::ImputationValues vals;
  vals.mode = RateMode::group_dependent;
  vals.g0 = 3.0;
  vals.g1 = 4.0;

  Eigen::VectorXd x(2);
  x << 3.0, 1.0;
  CHECK(mitigate::predict_with_imputation(f, x, 0, vals) == doctest::Approx(f.predict_row(x)));
  x << 0.0, 1.0;
  CHECK(mitigate::predict_with_imputation(f, x, 0, vals) == doctest::Approx(0.5 + 2.0 * 3.0 + 1.0));
  CHECK(mitigate::predict_with_imputation(f, x, 1, vals) == doctest::Approx(0.5 + 2.0 * 4.0 + 1.0));
  CHECK_THROWS_AS(mitigate::predict_with_imputation(f, x, std::nullopt, vals), DataError);

  mitigate::ImputationValues blind;
  blind.mode = RateMode::group_blind;
  blind.blind = 1.0;
  CHECK_THROWS_AS(mitigate::predict_with_imputation(f, x, 0, blind), DataError);
  CHECK(mitigate::predict_with_imputation(f, x, std::nullopt, blind) ==
        doctest::Approx(0.5 + 2.0 + 1.0));
}

TEST_CASE("optimal imputation dominates plain-zero prediction in test MSE") {
  auto pop = testsup::example_population(0.5, 1.0, 1.0, 0.5, 1.0);  // mean 1 -> strict gain
  pop.m0[0] = pop.m1[0] = 0.5;
  LinearModel truth;
  truth.alpha = pop.alpha;
  truth.beta = pop.beta;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Dataset train = testsup::sample_population(pop, 20000, seed * 11);
    const Dataset test = testsup::sample_population(pop, 20000, seed * 11 + 1);
    const auto vals = mitigate::optimal_imputation_values(train.observed(), 0, 0.5, 0.5,
                                                          RateMode::group_dependent);
    const Eigen::VectorXd imputed =
        mitigate::predict_with_imputation(truth, test.X, test.G, vals, 0);
    const Eigen::VectorXd plain = truth.predict(test.X);
    const double mse_imp = (imputed - *test.Y).squaredNorm();
    const double mse_plain = (plain - *test.Y).squaredNorm();
    CHECK(mse_imp < mse_plain);
  }
}

TEST_CASE("reporting rate: oracle constant classifier is exact") {
  const Dataset ds = zero_inflated_dataset(500, 8);
  ConstantClassifier oracle(0.62);
  const RateEstimate est =
      mitigate::estimate_reporting_rate(ds.observed(), 0, std::nullopt, oracle, 17);
  CHECK(est.m_hat == doctest::Approx(0.62).epsilon(1e-12));
  CHECK(!est.clamped);
  CHECK(est.n_eval > 0);
}

TEST_CASE("reporting rate: recovery on continuous synthetic data") {
  // Continuous Z_1 (no true zeros), masking at 0.6; h sees informative (Z_2, Y).
  auto pop = testsup::example_population(0.6, 1.0, 1.0, 0.6, 2.0);
  pop.m0[0] = pop.m1[0] = 0.6;
  double err_sum = 0.0;
  const int seeds = 5;
  for (int s = 0; s < seeds; ++s) {
    const Dataset ds = testsup::sample_population(pop, 20000, 600 + static_cast<std::uint64_t>(s));
    auto clf = mitigate::make_logistic_classifier();
    const RateEstimate est = mitigate::estimate_reporting_rate(
        ds.observed(), 0, std::nullopt, *clf, 71 + static_cast<std::uint64_t>(s));
    err_sum += std::abs(est.m_hat - 0.6);
  }
  CHECK(err_sum / seeds <= 0.05);
}

TEST_CASE("reporting rate: true zeros bias the estimate downward") {
  // No injected corruption (m = 1), but ~45% structural zeros whose nonzero
  // status is only partially predictable from (rest, Y): the estimator
  // averages P(X != 0 | rest, Y) over nonzero rows and lands below 1.
  const Dataset ds = zero_inflated_dataset(20000, 1234, 0.55, 1.5);
  auto clf = mitigate::make_logistic_classifier();
  const RateEstimate est = mitigate::estimate_reporting_rate(ds.observed(), 0, std::nullopt, *clf, 5);
  CHECK(est.m_hat < 0.93);
  CHECK(est.m_hat > 0.5);
}

TEST_CASE("reporting rate is invariant to row order") {
  const Dataset ds = zero_inflated_dataset(2000, 99);
  auto clf1 = mitigate::make_logistic_classifier();
  const RateEstimate a = mitigate::estimate_reporting_rate(ds.observed(), 0, 1, *clf1, 7);

  // reverse the rows
  Dataset rev = ds;
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    rev.X.row(i) = ds.X.row(ds.n() - 1 - i);
    rev.G[i] = ds.G[ds.n() - 1 - i];
    (*rev.Y)[i] = (*ds.Y)[ds.n() - 1 - i];
  }
  auto clf2 = mitigate::make_logistic_classifier();
  const RateEstimate b = mitigate::estimate_reporting_rate(rev.observed(), 0, 1, *clf2, 7);
  CHECK(a.m_hat == b.m_hat);
  CHECK(a.n_eval == b.n_eval);
}

TEST_CASE("reporting rate: empty eval set errors") {
  Dataset ds;
  ds.feature_names = {"a", "b"};
  ds.continuous_flags = {1, 1};
  ds.X = Eigen::MatrixXd::Zero(40, 2);  // target column all zero
  ds.X.col(1).setLinSpaced(40, -1.0, 1.0);
  ds.G = Eigen::VectorXi::Zero(40);
  ds.Y = Eigen::VectorXd::Zero(40);
  auto clf = mitigate::make_logistic_classifier();
  CHECK_THROWS_AS(mitigate::estimate_reporting_rate(ds.observed(), 0, std::nullopt, *clf, 3),
                  DataError);
}

TEST_CASE("feature omission baseline approaches the omitted-variable form") {
  const auto pop = testsup::example_population();
  const Dataset ds = testsup::sample_population(pop, 200000, 61);
  const LinearModel m = mitigate::baseline_feature_omission(ds.observed(), 0);
  CHECK(m.beta[0] == 0.0);
  CHECK(m.beta[1] == doctest::Approx(1.5).epsilon(0.02));

  // uncorrelated case: remaining coefficient unchanged
  const auto pop0 = testsup::example_population(0.0);
  const Dataset ds0 = testsup::sample_population(pop0, 200000, 62);
  const LinearModel m0 = mitigate::baseline_feature_omission(ds0.observed(), 0);
  CHECK(m0.beta[1] == doctest::Approx(1.0).epsilon(0.02));

  Dataset onefeat;
  onefeat.feature_names = {"only"};
  onefeat.continuous_flags = {1};
  onefeat.X = Eigen::MatrixXd::Random(10, 1);
  onefeat.G = Eigen::VectorXi::Zero(10);
  onefeat.Y = Eigen::VectorXd::Zero(10);
  CHECK_THROWS_AS(mitigate::baseline_feature_omission(onefeat.observed(), 0), DataError);
}

TEST_CASE("row omission baseline") {
  auto pop = testsup::example_population(0.5, 1.0, 1.0, 0.6, 2.0);  // continuous, no true zeros
  pop.m0[0] = pop.m1[0] = 0.6;
  const Dataset ds = testsup::sample_population(pop, 100000, 63);
  const LinearModel m = mitigate::baseline_row_omission(ds.observed(), 0);
  CHECK(m.beta[0] == doctest::Approx(1.0).epsilon(0.02));
  CHECK(m.beta[1] == doctest::Approx(1.0).epsilon(0.02));

  // no zeros present: identical to plain OLS
  auto full = testsup::example_population(0.5, 1.0, 1.0, 1.0, 2.0);
  const Dataset dsf = testsup::sample_population(full, 5000, 64);
  const LinearModel a = mitigate::baseline_row_omission(dsf.observed(), 0);
  const LinearModel b = estimate::ols_fit(dsf.X, *dsf.Y);
  CHECK(a.beta == b.beta);
  CHECK(a.alpha == b.alpha);

  // all rows zero in the target column: error
  Dataset dead;
  dead.feature_names = {"t", "u"};
  dead.continuous_flags = {1, 1};
  dead.X = Eigen::MatrixXd::Zero(30, 2);
  dead.X.col(1).setLinSpaced(30, 0.0, 1.0);
  dead.G = Eigen::VectorXi::Zero(30);
  dead.Y = Eigen::VectorXd::Zero(30);
  CHECK_THROWS_AS(mitigate::baseline_row_omission(dead.observed(), 0), NumericalError);
}

TEST_CASE("multiple imputation: no zeros gives an ensemble of identical fits") {
  auto pop = testsup::example_population(0.5, 1.0, 1.0, 1.0, 3.0);
  const Dataset ds = testsup::sample_population(pop, 2000, 65);
  const auto mi = mitigate::baseline_multiple_imputation(ds.observed(), 0, 4, 9);
  REQUIRE(mi.models.size() == 4);
  for (const auto& m : mi.models) {
    CHECK(m.beta == mi.models[0].beta);
    CHECK(m.alpha == mi.models[0].alpha);
  }
}

TEST_CASE("multiple imputation: zero residual variance imputes the conditional mean") {
  // target exactly linear in the other feature on nonzero rows
  const Eigen::Index n = 200;
  Dataset ds;
  ds.feature_names = {"t", "u"};
  ds.continuous_flags = {1, 1};
  ds.X.resize(n, 2);
  ds.G = Eigen::VectorXi::Zero(n);
  ds.Y.emplace(n);
  rng::SplitMix64 gen(14);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = gen.next_gaussian();
    ds.X(i, 1) = u;
    ds.X(i, 0) = i % 4 == 0 ? 0.0 : 2.0 + 0.5 * u;
    (*ds.Y)[i] = ds.X(i, 0) + u + 0.3 * gen.next_gaussian();
  }
  const auto mi = mitigate::baseline_multiple_imputation(ds.observed(), 0, 1, 5);
  CHECK(mi.residual_sd <= 2e-6);
  CHECK(mi.conditional.alpha == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(mi.conditional.beta[0] == doctest::Approx(0.5).epsilon(1e-9));

  // Probe the imputed cell itself: a selector model returns the (imputed)
  // target value, which must sit at the conditional mean up to the floored sd.
  mitigate::MultipleImputationModel probe = mi;
  probe.models.assign(1, LinearModel{0.0, Eigen::Vector2d(1.0, 0.0), {}});
  Eigen::MatrixXd rows(2, 2);
  rows << 0.0, 1.0,   // zero entry: imputed
          7.0, 1.0;   // nonzero entry: passed through
  const Eigen::VectorXd got = probe.predict(rows);
  CHECK(std::abs(got[0] - 2.5) < 1e-4);
  CHECK(got[1] == 7.0);
}

TEST_CASE("multiple imputation: true zeros bias the target coefficient") {
  const Dataset ds = zero_inflated_dataset(20000, 4321);
  // plain OLS on the uncorrupted data recovers beta exactly (noise-free Y)
  const LinearModel plain = estimate::ols_fit(ds.X, *ds.Y);
  CHECK(plain.beta[0] == doctest::Approx(1.0).epsilon(1e-6));
  const auto mi = mitigate::baseline_multiple_imputation(ds.observed(), 0, 5, 6);
  const LinearModel avg = mi.mean_model();
  CHECK(avg.beta[0] < 0.95);  // attenuated by wrongly imputed structural zeros
}

TEST_CASE("multiple imputation: insufficient nonzero rows errors") {
  Dataset ds;
  ds.feature_names = {"t", "u"};
  ds.continuous_flags = {1, 1};
  ds.X = Eigen::MatrixXd::Zero(30, 2);
  ds.X(0, 0) = 1.0;
  ds.X.col(1).setLinSpaced(30, 0.0, 1.0);
  ds.G = Eigen::VectorXi::Zero(30);
  ds.Y = Eigen::VectorXd::Zero(30);
  CHECK_THROWS_AS(mitigate::baseline_multiple_imputation(ds.observed(), 0, 3, 1), NumericalError);
}

TEST_CASE("multiple imputation draws are order-independent and seeded") {
  const Dataset ds = zero_inflated_dataset(500, 2);
  const auto a = mitigate::baseline_multiple_imputation(ds.observed(), 0, 3, 42);
  const auto b = mitigate::baseline_multiple_imputation(ds.observed(), 0, 3, 42);
  for (std::size_t k = 0; k < a.models.size(); ++k) CHECK(a.models[k].beta == b.models[k].beta);
  Eigen::MatrixXd probe(2, 2);
  probe << 0.0, 0.4, 1.0, -0.2;
  CHECK(a.predict(probe) == b.predict(probe));
}

}  // TEST_SUITE
