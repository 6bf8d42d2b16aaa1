#include "undrep/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include "undrep/dataset_io.hpp"
#include "undrep/estimate.hpp"
#include "undrep/logistic.hpp"
#include "undrep/rng.hpp"

namespace undrep::ingest {

Schema Schema::from_json(const json& j) {
  Schema s;
  s.features = j.at("features").get<std::vector<std::string>>();
  if (s.features.empty()) throw DataError("schema declares no feature columns");
  const auto& g = j.at("group");
  s.group_column = g.at("column").get<std::string>();
  if (g.contains("map"))
    for (const auto& [k, v] : g.at("map").items()) s.group_map[k] = v.get<int>();
  for (const auto& [_, v] : s.group_map)
    if (v != 0 && v != 1) throw DataError("schema group map values must be 0 or 1");
  if (j.contains("label")) s.label_column = j.at("label").at("column").get<std::string>();
  if (j.contains("discrete_features"))
    s.discrete_features = j.at("discrete_features").get<std::vector<std::string>>();
  return s;
}

Schema Schema::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open schema file: " + path);
  return from_json(json::parse(in));
}

Dataset load_csv(const std::string& path, const Schema& schema) {
  const io::CsvTable t = io::read_csv(path);
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  const auto d = static_cast<Eigen::Index>(schema.features.size());

  std::vector<Eigen::Index> fcol(d);
  for (Eigen::Index j = 0; j < d; ++j) fcol[j] = t.col(schema.features[static_cast<std::size_t>(j)]);
  const Eigen::Index gcol = t.col(schema.group_column);
  const Eigen::Index ycol = schema.label_column.empty() ? -1 : t.col(schema.label_column);

  Dataset ds;
  ds.feature_names = schema.features;
  const std::unordered_set<std::string> discrete(schema.discrete_features.begin(),
                                                 schema.discrete_features.end());
  for (const auto& name : schema.features)
    ds.continuous_flags.push_back(discrete.count(name) ? 0 : 1);

  ds.X.resize(n, d);
  ds.G.resize(n);
  if (ycol >= 0) ds.Y.emplace(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < d; ++j)
      ds.X(i, j) = io::parse_double(row[fcol[j]], i, schema.features[static_cast<std::size_t>(j)]);
    const std::string& graw = row[gcol];
    int g;
    if (!schema.group_map.empty()) {
      auto it = schema.group_map.find(graw);
      if (it == schema.group_map.end()) it = schema.group_map.find("*");  // wildcard bucket
      if (it == schema.group_map.end())
        throw DataError("group value '" + graw + "' at data row " + std::to_string(i) +
                        " is not covered by the schema group map");
      g = it->second;
    } else {
      const double v = io::parse_double(graw, i, schema.group_column);
      if (v != 0.0 && v != 1.0)
        throw DataError("group column value " + graw + " at data row " + std::to_string(i) +
                        " is not binary and no group map was declared");
      g = static_cast<int>(v);
    }
    ds.G[i] = g;
    if (ycol >= 0) (*ds.Y)[i] = io::parse_double(row[ycol], i, schema.label_column);
  }

  ds.provenance["source_csv"] = path;
  return ds;
}

SemisyntheticResult make_semisynthetic_outcomes(const Dataset& ds, std::optional<Rescale> rescale) {
  if (!ds.Y) throw DataError("semi-synthetic outcomes need a binary label column");
  const Eigen::VectorXd& y = *ds.Y;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y[i] != 0.0 && y[i] != 1.0)
      throw DataError("label must be binary 0/1; found " + std::to_string(y[i]) + " at row " +
                      std::to_string(i));

  const LogisticFit lf = fit_logistic(ds.X, y);
  Eigen::VectorXd p = lf.probabilities(ds.X);
  if (rescale) p = (rescale->b * p.array() + rescale->a).matrix();

  const LinearModel true_model = [&] {
    LinearModel m = estimate::ols_fit(ds.X, p);
    m.feature_names = ds.feature_names;
    return m;
  }();

  SemisyntheticResult out;
  out.data = ds;
  out.data.Y = true_model.predict(ds.X);
  out.true_model = true_model;
  out.logistic_diagnostics = {{"iterations", lf.iterations},
                              {"grad_norm", lf.grad_norm},
                              {"used_ridge", lf.used_ridge},
                              {"cap_triggered", lf.cap_triggered}};
  out.data.provenance["outcome"] = "semisynthetic";
  if (rescale) out.data.provenance["rescale"] = {rescale->a, rescale->b};
  return out;
}

Dataset add_outcome_noise(const Dataset& ds, const LinearModel& true_model, NoiseSpec& spec) {
  if (!(spec.target_r2 > 0.0 && spec.target_r2 <= 1.0))
    throw DataError("target R^2 must lie in (0,1]");
  if (!ds.Y) throw DataError("dataset has no outcome to add noise to");

  const Eigen::VectorXd fitted = true_model.predict(ds.X);
  const double mismatch = (fitted - *ds.Y).cwiseAbs().maxCoeff();
  if (mismatch > 1e-10 * std::max(1.0, ds.Y->cwiseAbs().maxCoeff()))
    throw DataError("Y does not equal the model's fitted values (max deviation " +
                    std::to_string(mismatch) + ")");

  Dataset out = ds;
  if (spec.target_r2 == 1.0) {
    spec.sigma_sq = 0.0;
    out.provenance["noise_sigma_sq"] = 0.0;
    out.provenance["noise_target_r2"] = 1.0;
    return out;
  }

  const double mean = fitted.mean();
  const double var = (fitted.array() - mean).square().sum() / static_cast<double>(fitted.size());
  if (var <= 0.0)
    throw NumericalError("fitted values have zero variance; target R^2 < 1 is unattainable");
  spec.sigma_sq = (1.0 - spec.target_r2) / spec.target_r2 * var;

  const double sd = std::sqrt(spec.sigma_sq);
  Eigen::VectorXd noisy = *out.Y;
  for (Eigen::Index i = 0; i < noisy.size(); ++i)
    noisy[i] += sd * rng::cell_gaussian(spec.seed, static_cast<std::uint64_t>(i), 0);
  out.Y = std::move(noisy);
  out.provenance["noise_sigma_sq"] = spec.sigma_sq;
  out.provenance["noise_target_r2"] = spec.target_r2;
  out.provenance["noise_seed"] = spec.seed;
  return out;
}

}  // namespace undrep::ingest
