#include "undrep/harness.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "undrep/corrupt.hpp"
#include "undrep/dataset_io.hpp"
#include "undrep/estimate.hpp"
#include "undrep/fairness.hpp"
#include "undrep/ingest.hpp"
#include "undrep/mitigate.hpp"
#include "undrep/rng.hpp"

namespace undrep::harness {

namespace fs = std::filesystem;

Method method_from_string(const std::string& s) {
  if (s == "plain") return Method::plain;
  if (s == "feature_omission") return Method::feature_omission;
  if (s == "row_omission") return Method::row_omission;
  if (s == "multiple_imputation") return Method::multiple_imputation;
  if (s == "augmented_imputation") return Method::augmented_imputation;
  if (s == "true_params") return Method::true_params;
  throw DataError("unknown method '" + s + "'");
}

const char* to_string(Method m) {
  switch (m) {
    case Method::plain: return "plain";
    case Method::feature_omission: return "feature_omission";
    case Method::row_omission: return "row_omission";
    case Method::multiple_imputation: return "multiple_imputation";
    case Method::augmented_imputation: return "augmented_imputation";
    default: return "true_params";
  }
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  c.dataset = j.at("dataset").get<std::string>();
  c.schema = j.at("schema").get<std::string>();
  c.outcome_mode = j.value("outcome_mode", std::string("semisynthetic"));
  if (c.outcome_mode != "semisynthetic" && c.outcome_mode != "raw")
    throw DataError("outcome_mode must be 'semisynthetic' or 'raw'");
  if (j.contains("noise_r2") && !j["noise_r2"].is_null()) c.noise_r2 = j["noise_r2"].get<double>();
  if (j.contains("rescale") && !j["rescale"].is_null()) {
    const auto v = j["rescale"].get<std::vector<double>>();
    if (v.size() != 2) throw DataError("rescale must be [a, b]");
    c.rescale = {v[0], v[1]};
  }
  c.features = j.at("features").get<std::vector<std::string>>();
  for (const auto& f : c.features)
    if (f.find_first_of(",\"\n\r") != std::string::npos)
      throw DataError("feature name '" + f + "' would break the CSV outputs");
  c.groups = j.at("groups").get<std::vector<int>>();
  for (int g : c.groups)
    if (g != 0 && g != 1) throw DataError("groups entries must be 0 or 1");
  c.rates = j.at("rates").get<std::vector<double>>();
  for (double r : c.rates)
    if (!(r >= 0.0 && r <= 1.0)) throw DataError("rates must lie in [0,1]");
  for (const auto& m : j.at("methods")) c.methods.push_back(method_from_string(m.get<std::string>()));
  c.reps = j.value("reps", 30);
  if (c.reps < 1) throw DataError("reps must be positive");
  c.C_grid = j.at("C_grid").get<std::vector<double>>();
  c.seed = j.value("seed", std::uint64_t{0});
  c.test_frac = j.value("test_frac", 0.2);
  c.mi_draws = j.value("mi_draws", 5);
  c.z_independent_of_g = j.value("z_independent_of_g", false);
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open config file: " + path);
  return from_json(json::parse(in));
}

json ExperimentConfig::to_json() const {
  json j;
  j["dataset"] = dataset;
  j["schema"] = schema;
  j["outcome_mode"] = outcome_mode;
  if (noise_r2) j["noise_r2"] = *noise_r2;
  if (rescale) j["rescale"] = {rescale->first, rescale->second};
  j["features"] = features;
  j["groups"] = groups;
  j["rates"] = rates;
  json ms = json::array();
  for (Method m : methods) ms.push_back(to_string(m));
  j["methods"] = ms;
  j["reps"] = reps;
  j["C_grid"] = C_grid;
  j["seed"] = seed;
  j["test_frac"] = test_frac;
  j["mi_draws"] = mi_draws;
  j["z_independent_of_g"] = z_independent_of_g;
  return j;
}

namespace {

struct Cell {
  std::size_t feature_pos, group_pos, rate_pos, method_pos;
  int rep;
};

struct CellResult {
  bool ok = false;
  std::string error;
  std::uint64_t seed = 0;
  std::vector<ExcessSelectionResult> curve;
  double test_r2 = 0.0;
  double alpha = 0.0;
  Eigen::VectorXd beta;
};

// Seeds shared by every method at the same (feature, group, rate, rep) so
// method comparisons are paired; corruption draws share one key across rates,
// which nests the masked sets as the rate grows.
struct CellSeeds {
  std::uint64_t split, corrupt_train, corrupt_test, mi, rate_est;
};

CellSeeds cell_seeds(std::uint64_t base, std::size_t feature_pos, int group, int rep) {
  const std::uint64_t k =
      rng::derive_seed(base, static_cast<std::uint64_t>(feature_pos) * 2 + static_cast<std::uint64_t>(group));
  CellSeeds s;
  s.split = rng::derive_seed(base, 0xA11, static_cast<std::uint64_t>(rep));
  s.corrupt_train = rng::derive_seed(k, 0xB, static_cast<std::uint64_t>(rep));
  s.corrupt_test = rng::derive_seed(k, 0xC, static_cast<std::uint64_t>(rep));
  s.mi = rng::derive_seed(k, 0xD, static_cast<std::uint64_t>(rep));
  s.rate_est = rng::derive_seed(k, 0xE, static_cast<std::uint64_t>(rep));
  return s;
}

double r_squared(const Eigen::VectorXd& pred, const Eigen::VectorXd& y) {
  const double mean = y.mean();
  const double tss = (y.array() - mean).square().sum();
  const double rss = (pred - y).squaredNorm();
  return tss > 0.0 ? 1.0 - rss / tss : 0.0;
}

CellResult run_cell(const Dataset& data, const LinearModel& true_model, const ExperimentConfig& cfg,
                    const Cell& cell, Eigen::Index target_index) {
  CellResult res;
  const int group = cfg.groups[cell.group_pos];
  const double rate = cfg.rates[cell.rate_pos];
  const Method method = cfg.methods[cell.method_pos];
  const CellSeeds seeds = cell_seeds(cfg.seed, cell.feature_pos, group, cell.rep);
  res.seed = seeds.corrupt_train;

  auto [train, test] = corrupt::split_train_test(data, cfg.test_frac, seeds.split);

  UnderReportingConfig uc;
  uc.feature_index = target_index;
  uc.rate_g0 = group == 0 ? rate : 0.0;
  uc.rate_g1 = group == 1 ? rate : 0.0;
  uc.seed = seeds.corrupt_train;
  const Dataset corr_train = corrupt::inject_underreporting(train, uc);
  uc.seed = seeds.corrupt_test;
  const Dataset corr_test = corrupt::inject_underreporting(test, uc);

  // Reference: the model a clean-data pipeline would use, refit on this split.
  const LinearModel reference = estimate::ols_fit(train.X, *train.Y);
  const Eigen::VectorXd pred_reference = reference.predict(test.X);

  const ObservedView tr = corr_train.observed();
  Eigen::VectorXd pred;
  LinearModel fitted;
  switch (method) {
    case Method::plain: {
      fitted = estimate::ols_fit(tr.X, tr.Y);
      pred = fitted.predict(corr_test.X);
      break;
    }
    case Method::feature_omission: {
      fitted = mitigate::baseline_feature_omission(tr, target_index);
      pred = fitted.predict(corr_test.X);
      break;
    }
    case Method::row_omission: {
      fitted = mitigate::baseline_row_omission(tr, target_index);
      pred = fitted.predict(corr_test.X);
      break;
    }
    case Method::multiple_imputation: {
      const auto mi =
          mitigate::baseline_multiple_imputation(tr, target_index, cfg.mi_draws, seeds.mi);
      fitted = mi.mean_model();
      pred = mi.predict(corr_test.X, 0x7e57ULL);
      break;
    }
    case Method::augmented_imputation: {
      auto clf0 = mitigate::make_logistic_classifier();
      auto clf1 = mitigate::make_logistic_classifier();
      const RateEstimate m0 =
          mitigate::estimate_reporting_rate(tr, target_index, 0, *clf0, seeds.rate_est);
      const RateEstimate m1 =
          mitigate::estimate_reporting_rate(tr, target_index, 1, *clf1, seeds.rate_est);
      const double m0c = std::max(m0.m_hat, 1e-3);
      const double m1c = std::max(m1.m_hat, 1e-3);
      const auto fit = mitigate::augmented_fit(tr, target_index, m0c, m1c,
                                               mitigate::RateMode::group_dependent);
      const auto vals = mitigate::optimal_imputation_values(tr, target_index, m0c, m1c,
                                                            mitigate::RateMode::group_dependent);
      fitted = fit.model;
      pred = mitigate::predict_with_imputation(fitted, corr_test.X, corr_test.G, vals, target_index);
      break;
    }
    case Method::true_params: {
      fitted = true_model;
      pred = fitted.predict(corr_test.X);
      break;
    }
  }

  res.curve = fairness::excess_curve(pred, pred_reference, test.G, cfg.C_grid);
  res.test_r2 = r_squared(pred, *test.Y);
  res.alpha = fitted.alpha;
  res.beta = fitted.beta;
  res.ok = true;
  return res;
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& cfg, const std::string& out_dir, int threads) {
  if (threads < 1) threads = 1;
  fs::create_directories(out_dir);

  const ingest::Schema schema = ingest::Schema::load(cfg.schema);
  const Dataset raw = ingest::load_csv(cfg.dataset, schema);

  Dataset data;
  LinearModel true_model;
  json outcome_info;
  if (cfg.outcome_mode == "semisynthetic") {
    std::optional<ingest::Rescale> rs;
    if (cfg.rescale) rs = ingest::Rescale{cfg.rescale->first, cfg.rescale->second};
    auto semi = ingest::make_semisynthetic_outcomes(raw, rs);
    data = std::move(semi.data);
    true_model = std::move(semi.true_model);
    outcome_info["logistic"] = semi.logistic_diagnostics;
  } else {
    data = raw;
    if (!data.Y) throw DataError("raw outcome mode needs an outcome column");
    true_model = estimate::ols_fit(data.X, *data.Y);
    true_model.feature_names = data.feature_names;
  }
  if (cfg.noise_r2) {
    NoiseSpec spec;
    spec.target_r2 = *cfg.noise_r2;
    spec.seed = rng::derive_seed(cfg.seed, 0x0153);
    data = ingest::add_outcome_noise(data, true_model, spec);
    outcome_info["noise_sigma_sq"] = spec.sigma_sq;
  }

  std::vector<Eigen::Index> target_index(cfg.features.size());
  for (std::size_t f = 0; f < cfg.features.size(); ++f) {
    auto it = std::find(data.feature_names.begin(), data.feature_names.end(), cfg.features[f]);
    if (it == data.feature_names.end())
      throw DataError("corruption target '" + cfg.features[f] + "' is not a feature column");
    target_index[f] = it - data.feature_names.begin();
  }

  std::vector<Cell> cells;
  for (std::size_t f = 0; f < cfg.features.size(); ++f)
    for (std::size_t g = 0; g < cfg.groups.size(); ++g)
      for (std::size_t r = 0; r < cfg.rates.size(); ++r)
        for (std::size_t m = 0; m < cfg.methods.size(); ++m)
          for (int rep = 0; rep < cfg.reps; ++rep) cells.push_back({f, g, r, m, rep});

  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        results[i] = run_cell(data, true_model, cfg, cells[i], target_index[cells[i].feature_pos]);
      } catch (const std::exception& e) {
        results[i].ok = false;
        results[i].error = e.what();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  using io::format_double;
  std::ofstream res_out(fs::path(out_dir) / "results.csv", std::ios::binary);
  res_out << "feature,corrupted_group,rate,method,rep,seed,C,group,rate_corrupted,"
             "rate_reference,delta,threshold_corrupted,threshold_reference,tie_flag";
  if (cfg.z_independent_of_g) res_out << ",overselected_group";
  res_out << '\n';
  std::ofstream r2_out(fs::path(out_dir) / "r2.csv", std::ios::binary);
  r2_out << "feature,corrupted_group,rate,method,rep,seed,test_r2\n";

  json failures = json::array();
  std::size_t n_failed = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& c = cells[i];
    const CellResult& r = results[i];
    const std::string prefix = cfg.features[c.feature_pos] + "," +
                               std::to_string(cfg.groups[c.group_pos]) + "," +
                               format_double(cfg.rates[c.rate_pos]) + "," +
                               to_string(cfg.methods[c.method_pos]) + "," + std::to_string(c.rep) +
                               "," + std::to_string(r.seed);
    if (!r.ok) {
      ++n_failed;
      failures.push_back({{"feature", cfg.features[c.feature_pos]},
                          {"group", cfg.groups[c.group_pos]},
                          {"rate", cfg.rates[c.rate_pos]},
                          {"method", to_string(cfg.methods[c.method_pos])},
                          {"rep", c.rep},
                          {"error", r.error}});
      continue;
    }
    for (const auto& e : r.curve) {
      for (int g = 0; g < 2; ++g) {
        res_out << prefix << ',' << format_double(e.C) << ',' << g << ','
                << format_double(g ? e.rate_corrupted_g1 : e.rate_corrupted_g0) << ','
                << format_double(g ? e.rate_reference_g1 : e.rate_reference_g0) << ','
                << format_double(e.delta(g)) << ',' << format_double(e.threshold_corrupted) << ','
                << format_double(e.threshold_reference) << ','
                << (e.tie_corrupted || e.tie_reference);
        if (cfg.z_independent_of_g) {
          // independent-case reading: which group the corrupted model favors
          const int over = e.delta_g1 > e.delta_g0 ? 1 : (e.delta_g1 < e.delta_g0 ? 0 : -1);
          res_out << ',' << over;
        }
        res_out << '\n';
      }
    }
    r2_out << prefix << ',' << format_double(r.test_r2) << '\n';
  }

  // Mean/sd of coefficients over reps, plus the generating model's row.
  std::ofstream par_out(fs::path(out_dir) / "params.csv", std::ios::binary);
  par_out << "feature,corrupted_group,rate,method,coef,mean,sd\n";
  const Eigen::Index d = data.d();
  auto coef_name = [&](Eigen::Index k) {
    return k == 0 ? std::string("intercept") : data.feature_names[static_cast<std::size_t>(k - 1)];
  };
  for (std::size_t f = 0; f < cfg.features.size(); ++f)
    for (std::size_t g = 0; g < cfg.groups.size(); ++g)
      for (std::size_t rr = 0; rr < cfg.rates.size(); ++rr)
        for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
          std::vector<const CellResult*> ok_cells;
          for (std::size_t i = 0; i < cells.size(); ++i) {
            const Cell& c = cells[i];
            if (c.feature_pos == f && c.group_pos == g && c.rate_pos == rr && c.method_pos == m &&
                results[i].ok)
              ok_cells.push_back(&results[i]);
          }
          if (ok_cells.empty()) continue;
          for (Eigen::Index k = 0; k <= d; ++k) {
            double mean = 0.0;
            for (const auto* cr : ok_cells) mean += k == 0 ? cr->alpha : cr->beta[k - 1];
            mean /= static_cast<double>(ok_cells.size());
            double var = 0.0;
            for (const auto* cr : ok_cells) {
              const double v = (k == 0 ? cr->alpha : cr->beta[k - 1]) - mean;
              var += v * v;
            }
            const double sd = ok_cells.size() > 1
                                  ? std::sqrt(var / static_cast<double>(ok_cells.size() - 1))
                                  : 0.0;
            par_out << cfg.features[f] << ',' << cfg.groups[g] << ','
                    << format_double(cfg.rates[rr]) << ',' << to_string(cfg.methods[m]) << ','
                    << coef_name(k) << ',' << format_double(mean) << ',' << format_double(sd)
                    << '\n';
          }
        }
  for (Eigen::Index k = 0; k <= d; ++k)
    par_out << ",,," << "truth" << ',' << coef_name(k) << ','
            << format_double(k == 0 ? true_model.alpha : true_model.beta[k - 1]) << ",0\n";

  json manifest;
  manifest["library_version"] = kVersion;
  manifest["config"] = cfg.to_json();
  manifest["config_hash"] = [&] {
    const std::string dump = cfg.to_json().dump();
    const fs::path tmp = fs::path(out_dir) / ".config_canonical.json";
    std::ofstream t(tmp, std::ios::binary);
    t << dump;
    t.close();
    std::string h = io::sha256_file(tmp.string());
    fs::remove(tmp);
    return h;
  }();
  manifest["input_sha256"] = io::sha256_file(cfg.dataset);
  manifest["base_seed"] = cfg.seed;
  manifest["seed_derivation"] =
      "split=derive(seed,0xA11,rep); corruption=derive(derive(seed,2*feature_pos+group),"
      "0xB|0xC,rep) keyed per (row,column); shared across rates and methods";
  manifest["corruption_timing"] =
      "corruption applied after the train/test split; train and test corrupted with "
      "independent draws at the same rate";
  manifest["outcome"] = outcome_info;
  manifest["n_cells"] = cells.size();
  manifest["n_failed"] = n_failed;
  manifest["failures"] = failures;
  std::ofstream man_out(fs::path(out_dir) / "manifest.json", std::ios::binary);
  man_out << manifest.dump(2) << '\n';

  RunSummary s;
  s.n_cells = cells.size();
  s.n_failed = n_failed;
  s.out_dir = out_dir;
  return s;
}

}  // namespace undrep::harness
