#include "undrep/corrupt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "undrep/rng.hpp"

namespace undrep::corrupt {

Dataset inject_underreporting(const Dataset& ds, const UnderReportingConfig& cfg) {
  const Eigen::Index n = ds.n();
  const Eigen::Index d = ds.d();
  const Eigen::Index j = cfg.feature_index;
  if (j < 0 || j >= d)
    throw DataError("feature index " + std::to_string(j) + " out of range [0," +
                    std::to_string(d) + ")");
  if (!(cfg.rate_g0 >= 0.0 && cfg.rate_g0 <= 1.0 && cfg.rate_g1 >= 0.0 && cfg.rate_g1 <= 1.0))
    throw DataError("under-reporting rates must lie in [0,1]");
  if (!ds.continuous_flags.empty() && !ds.continuous_flags[static_cast<std::size_t>(j)])
    throw DataError("feature '" + ds.feature_names[static_cast<std::size_t>(j)] +
                    "' is not flagged continuous/count and is not eligible for under-reporting");

  Dataset out = ds;
  if (!out.Z) out.Z = ds.X;  // promote observed values to ground truth
  if (!out.xi_mask) out.xi_mask = Eigen::MatrixXd::Ones(n, d);

  for (Eigen::Index i = 0; i < n; ++i) {
    const double rate = ds.G[i] == 1 ? cfg.rate_g1 : cfg.rate_g0;
    const double u = rng::cell_unit(cfg.seed, static_cast<std::uint64_t>(i),
                                    static_cast<std::uint64_t>(j));
    (*out.xi_mask)(i, j) = u < rate ? 0.0 : 1.0;
  }
  out.X = out.Z->cwiseProduct(*out.xi_mask);

  out.provenance["corruption"] = {{"feature_index", j},
                                  {"rate_g0", cfg.rate_g0},
                                  {"rate_g1", cfg.rate_g1},
                                  {"seed", cfg.seed}};
  return out;
}

namespace {

Dataset take_rows(const Dataset& ds, const std::vector<Eigen::Index>& rows) {
  Dataset out;
  out.feature_names = ds.feature_names;
  out.continuous_flags = ds.continuous_flags;
  out.provenance = ds.provenance;
  const auto k = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index d = ds.d();
  out.X.resize(k, d);
  if (ds.Z) out.Z.emplace(k, d);
  if (ds.xi_mask) out.xi_mask.emplace(k, d);
  out.G.resize(k);
  if (ds.Y) out.Y.emplace(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::Index r = rows[static_cast<std::size_t>(i)];
    out.X.row(i) = ds.X.row(r);
    if (ds.Z) out.Z->row(i) = ds.Z->row(r);
    if (ds.xi_mask) out.xi_mask->row(i) = ds.xi_mask->row(r);
    out.G[i] = ds.G[r];
    if (ds.Y) (*out.Y)[i] = (*ds.Y)[r];
  }
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double test_frac,
                                             std::uint64_t seed) {
  const Eigen::Index n = ds.n();
  if (n < 2) throw DataError("need at least 2 rows to split");
  if (!(test_frac > 0.0 && test_frac < 1.0)) throw DataError("test fraction must lie in (0,1)");

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  rng::SplitMix64 gen(seed);
  for (std::size_t i = idx.size() - 1; i > 0; --i) {
    const auto k = static_cast<std::size_t>(gen.next_below(i + 1));
    std::swap(idx[i], idx[k]);
  }

  const auto n_train = static_cast<Eigen::Index>(
      std::ceil(static_cast<double>(n) * (1.0 - test_frac) - 1e-9));
  std::vector<Eigen::Index> train_rows(idx.begin(), idx.begin() + n_train);
  std::vector<Eigen::Index> test_rows(idx.begin() + n_train, idx.end());
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return {take_rows(ds, train_rows), take_rows(ds, test_rows)};
}

}  // namespace undrep::corrupt
