#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "undrep/corrupt.hpp"
#include "undrep/dataset_io.hpp"
#include "undrep/estimate.hpp"
#include "undrep/fairness.hpp"
#include "undrep/harness.hpp"
#include "undrep/ingest.hpp"
#include "undrep/mitigate.hpp"
#include "undrep/theory.hpp"

namespace fs = std::filesystem;
using namespace undrep;

namespace {

struct GlobalOpts {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::string format = "csv";
  int threads = 1;
};

std::string out_path(const GlobalOpts& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return (fs::path(g.out_dir) / name).string();
}

Eigen::Index resolve_feature(const Dataset& ds, const std::string& feature) {
  for (std::size_t j = 0; j < ds.feature_names.size(); ++j)
    if (ds.feature_names[j] == feature) return static_cast<Eigen::Index>(j);
  try {
    return static_cast<Eigen::Index>(std::stol(feature));
  } catch (...) {
    throw DataError("unknown feature '" + feature + "'");
  }
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << content;
}

std::vector<double> parse_grid(const std::string& spec) {
  // "0.1:0.9:0.1" or "0.1,0.2,0.5"
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    double lo, hi, step;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 || step <= 0)
      throw DataError("bad grid spec '" + spec + "'");
    for (double c = lo; c <= hi + 1e-12; c += step) out.push_back(c);
  } else {
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation, analysis and mitigation of differential feature under-reporting in "
               "linear risk models"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalOpts g;
  app.add_option("--seed", g.seed, "base random seed");
  app.add_option("--out-dir", g.out_dir, "output directory");
  app.add_option("--format", g.format, "output format for reports: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--threads", g.threads, "worker threads for `run`");

  // ingest
  auto* c_ingest = app.add_subcommand("ingest", "load a CSV with a schema into a dataset bundle");
  std::string in_csv, in_schema, in_out = "dataset";
  c_ingest->add_option("--csv", in_csv, "input CSV")->required();
  c_ingest->add_option("--schema", in_schema, "schema JSON")->required();
  c_ingest->add_option("--out", in_out, "bundle base name");

  // synthesize
  auto* c_syn = app.add_subcommand("synthesize", "construct semi-synthetic linear outcomes");
  std::string syn_data, syn_out = "semisynthetic";
  double syn_a = 0.0, syn_b = 1.0, syn_noise = 1.0;
  bool syn_rescale = false;
  c_syn->add_option("--data", syn_data, "dataset bundle base")->required();
  c_syn->add_option("--out", syn_out, "output bundle base");
  auto* opt_a = c_syn->add_option("--rescale-a", syn_a, "affine rescale offset");
  c_syn->add_option("--rescale-b", syn_b, "affine rescale slope");
  c_syn->add_option("--noise-r2", syn_noise, "target R^2 for added outcome noise");
  c_syn->callback([&] { syn_rescale = opt_a->count() > 0; });

  // corrupt
  auto* c_cor = app.add_subcommand("corrupt", "inject group-dependent under-reporting");
  std::string cor_data, cor_feature, cor_out = "corrupted";
  double cor_r0 = 0.0, cor_r1 = 0.0;
  c_cor->add_option("--data", cor_data, "dataset bundle base")->required();
  c_cor->add_option("--feature", cor_feature, "feature name or index")->required();
  c_cor->add_option("--rate0", cor_r0, "under-reporting rate for group 0");
  c_cor->add_option("--rate1", cor_r1, "under-reporting rate for group 1");
  c_cor->add_option("--out", cor_out, "output bundle base");

  // fit
  auto* c_fit = app.add_subcommand("fit", "fit a model on a (possibly corrupted) dataset");
  std::string fit_data, fit_method = "plain", fit_target, fit_out = "model.json", fit_pred;
  double fit_m0 = 1.0, fit_m1 = 1.0;
  c_fit->add_option("--data", fit_data, "dataset bundle base")->required();
  c_fit->add_option("--method", fit_method,
                    "plain|feature_omission|row_omission|multiple_imputation|"
                    "augmented_imputation|true_params");
  c_fit->add_option("--target", fit_target, "under-reported feature (name or index)");
  c_fit->add_option("--m0", fit_m0, "reporting rate for group 0 (augmented/imputation)");
  c_fit->add_option("--m1", fit_m1, "reporting rate for group 1");
  c_fit->add_option("--out", fit_out, "model JSON output");
  c_fit->add_option("--pred-out", fit_pred, "also write predictions CSV for the same data");

  // audit
  auto* c_aud = app.add_subcommand("audit", "excess selection rates between two prediction files");
  std::string aud_corr, aud_ref, aud_grid = "0.1:0.9:0.1", aud_out;
  c_aud->add_option("--corrupted", aud_corr, "predictions CSV (pred,group)")->required();
  c_aud->add_option("--reference", aud_ref, "reference predictions CSV")->required();
  c_aud->add_option("--grid", aud_grid, "C grid: lo:hi:step or comma list");
  c_aud->add_option("--out", aud_out, "output CSV (default stdout)");

  // theory
  auto* c_thy = app.add_subcommand("theory", "closed-form selection-rate analysis from moments");
  std::string thy_moments, thy_out;
  Eigen::Index thy_target = 0;
  c_thy->add_option("--moments", thy_moments, "population JSON (mu, sigma, alpha, beta, r, m0, m1)")
      ->required();
  c_thy->add_option("--target", thy_target, "under-reported feature index");
  c_thy->add_option("--out", thy_out, "output JSON (default stdout)");

  // estimate-rate
  auto* c_rate = app.add_subcommand("estimate-rate", "PU estimate of the reporting rate");
  std::string rate_data, rate_target;
  int rate_group = -1;
  c_rate->add_option("--data", rate_data, "dataset bundle base")->required();
  c_rate->add_option("--target", rate_target, "feature name or index")->required();
  c_rate->add_option("--group", rate_group, "restrict to group (0 or 1; default both)");

  // run
  auto* c_run = app.add_subcommand("run", "run a full experiment config");
  std::string run_config;
  c_run->add_option("--config", run_config, "experiment config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors exit 1, --help exits 0
  }

  try {
    if (*c_ingest) {
      const auto schema = ingest::Schema::load(in_schema);
      const Dataset ds = ingest::load_csv(in_csv, schema);
      io::save_dataset(ds, out_path(g, in_out));
      std::cout << "wrote " << out_path(g, in_out) << ".csv (" << ds.n() << " rows, " << ds.d()
                << " features)\n";
    } else if (*c_syn) {
      Dataset ds = io::load_dataset(syn_data);
      std::optional<ingest::Rescale> rs;
      if (syn_rescale) rs = ingest::Rescale{syn_a, syn_b};
      auto semi = ingest::make_semisynthetic_outcomes(ds, rs);
      if (syn_noise < 1.0) {
        NoiseSpec spec;
        spec.target_r2 = syn_noise;
        spec.seed = g.seed;
        semi.data = ingest::add_outcome_noise(semi.data, semi.true_model, spec);
      }
      io::save_dataset(semi.data, out_path(g, syn_out));
      write_text(out_path(g, syn_out) + ".model.json", semi.true_model.to_json().dump(2) + "\n");
      std::cout << "wrote " << out_path(g, syn_out) << ".csv and .model.json\n";
    } else if (*c_cor) {
      const Dataset ds = io::load_dataset(cor_data);
      UnderReportingConfig uc;
      uc.feature_index = resolve_feature(ds, cor_feature);
      uc.rate_g0 = cor_r0;
      uc.rate_g1 = cor_r1;
      uc.seed = g.seed;
      io::save_dataset(corrupt::inject_underreporting(ds, uc), out_path(g, cor_out));
      std::cout << "wrote " << out_path(g, cor_out) << ".csv\n";
    } else if (*c_fit) {
      const Dataset ds = io::load_dataset(fit_data);
      const ObservedView v = ds.observed();
      const Eigen::Index target = fit_target.empty() ? 0 : resolve_feature(ds, fit_target);
      LinearModel model;
      json extra;
      const auto method = harness::method_from_string(fit_method);
      switch (method) {
        case harness::Method::plain:
          model = estimate::ols_fit(v.X, v.Y);
          break;
        case harness::Method::feature_omission:
          model = mitigate::baseline_feature_omission(v, target);
          break;
        case harness::Method::row_omission:
          model = mitigate::baseline_row_omission(v, target);
          break;
        case harness::Method::multiple_imputation: {
          const auto mi = mitigate::baseline_multiple_imputation(v, target, 5, g.seed);
          model = mi.mean_model();
          extra["draws"] = mi.models.size();
          break;
        }
        case harness::Method::augmented_imputation: {
          const auto rep = mitigate::augmented_fit(v, target, fit_m0, fit_m1);
          model = rep.model;
          const auto vals = mitigate::optimal_imputation_values(v, target, fit_m0, fit_m1);
          extra["hessian_definite"] = rep.hessian_definite;
          extra["fallback_ridge"] = rep.fallback_ridge;
          if (vals.g0) extra["imputation_g0"] = *vals.g0;
          if (vals.g1) extra["imputation_g1"] = *vals.g1;
          break;
        }
        case harness::Method::true_params:
          throw DataError("true_params is only meaningful inside `run` (needs the generator)");
      }
      model.feature_names = ds.feature_names;
      json out = model.to_json();
      out["method"] = fit_method;
      if (!extra.empty()) out["details"] = extra;
      write_text(out_path(g, fit_out), out.dump(2) + "\n");
      if (!fit_pred.empty()) io::save_predictions(out_path(g, fit_pred), model.predict(v.X), v.G);
      std::cout << "wrote " << out_path(g, fit_out) << "\n";
    } else if (*c_aud) {
      const auto [pc, gc] = io::load_predictions(aud_corr);
      const auto [pr, gr] = io::load_predictions(aud_ref);
      if (gc.size() != gr.size()) throw DataError("prediction files have different lengths");
      const auto curve = fairness::excess_curve(pc, pr, gc, parse_grid(aud_grid));
      std::string payload;
      if (g.format == "json") {
        json arr = json::array();
        for (const auto& r : curve)
          arr.push_back({{"C", r.C},
                         {"delta_g0", r.delta_g0},
                         {"delta_g1", r.delta_g1},
                         {"rate_corrupted_g0", r.rate_corrupted_g0},
                         {"rate_corrupted_g1", r.rate_corrupted_g1},
                         {"rate_reference_g0", r.rate_reference_g0},
                         {"rate_reference_g1", r.rate_reference_g1},
                         {"threshold_corrupted", r.threshold_corrupted},
                         {"threshold_reference", r.threshold_reference},
                         {"tie_flag", r.tie_corrupted || r.tie_reference}});
        payload = arr.dump(2) + "\n";
      } else {
        payload = fairness::excess_curve_csv(curve);
      }
      if (aud_out.empty()) std::cout << payload;
      else write_text(out_path(g, aud_out), payload);
    } else if (*c_thy) {
      std::ifstream in(thy_moments, std::ios::binary);
      if (!in) throw DataError("cannot open moments file: " + thy_moments);
      const auto pop = GaussianPopulation::from_json(json::parse(in));
      const auto rep = theory::classify_case(pop, thy_target);
      const std::string payload = rep.to_json().dump(2) + "\n";
      if (thy_out.empty()) std::cout << payload;
      else write_text(out_path(g, thy_out), payload);
    } else if (*c_rate) {
      const Dataset ds = io::load_dataset(rate_data);
      const ObservedView v = ds.observed();
      const Eigen::Index target = resolve_feature(ds, rate_target);
      auto clf = mitigate::make_logistic_classifier();
      std::optional<int> grp;
      if (rate_group == 0 || rate_group == 1) grp = rate_group;
      const RateEstimate est = mitigate::estimate_reporting_rate(v, target, grp, *clf, g.seed);
      json out;
      out["m_hat"] = est.m_hat;
      out["clamped"] = est.clamped;
      if (est.group) out["group"] = *est.group;
      out["n_train"] = est.n_train;
      out["n_eval"] = est.n_eval;
      out["diagnostics"] = est.classifier_diagnostics;
      std::cout << out.dump(2) << "\n";
    } else if (*c_run) {
      const auto cfg = harness::ExperimentConfig::load(run_config);
      const auto summary = harness::run_experiment(cfg, g.out_dir, g.threads);
      std::cout << "cells: " << summary.n_cells << ", failed: " << summary.n_failed << ", outputs in "
                << summary.out_dir << "\n";
      if (!summary.acceptable()) {
        std::cerr << "more than 10% of cells failed\n";
        return 3;
      }
    }
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
