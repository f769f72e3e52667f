// tailreg: spatio-temporal extreme-quantile estimation by three-stage
// Bayesian tail regression. Subcommands: simulate, fit, predict, cv,
// prior-table, report.
#include <CLI11.hpp>
#include <json.hpp>

#include "tailreg/evaluation.hpp"
#include "tailreg/io.hpp"
#include "tailreg/pipeline.hpp"
#include "tailreg/simulate.hpp"

#include <filesystem>
#include <iostream>

namespace {

using namespace tailreg;
namespace fs = std::filesystem;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

RunConfig load_config(const CommonArgs& args) {
  RunConfig cfg = args.config_path.empty()
                      ? RunConfig{}
                      : RunConfig::from_file(args.config_path);
  for (const auto& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects section.key=value, got '" + kv + "'");
    cfg.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

Dataset load_data(const RunConfig& cfg, ParseReport* report,
                  CleaningReport* cleaning_report) {
  if (cfg.data_path.empty() || cfg.site_path.empty())
    throw ConfigError("data.data_path and data.site_path must be set");
  Dataset data = ingest(cfg.data_path, cfg.site_path, report);
  return clean(data, cfg.cleaning, cleaning_report);
}

void print_parse_report(const ParseReport& report,
                        const CleaningReport& cleaning) {
  std::cout << "ingest: " << report.accepted << "/" << report.total_rows
            << " rows accepted";
  if (!report.rejected.empty())
    std::cout << ", " << report.rejected.size() << " rejected";
  std::cout << "\n";
  for (const auto& [line, reason] : report.rejected)
    std::cout << "  rejected line " << line << ": " << reason << "\n";
  for (const auto& [rule, removed] : cleaning.removed)
    std::cout << "clean: " << rule << " removed " << removed << " rows\n";
}

int cmd_simulate(const CommonArgs& common, const std::string& out_data,
                 const std::string& out_sites, const std::string& out_truth) {
  const RunConfig cfg = load_config(common);
  const auto [data, truth] = simulate(cfg);
  {
    std::ofstream sites(out_sites);
    if (!sites) throw DataError("cannot open '" + out_sites + "'");
    sites << "station_id,x_km,y_km\n";
    for (const auto& s : data.sites.sites) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%s,%.10g,%.10g\n", s.id.c_str(), s.x_km,
                    s.y_km);
      sites << buf;
    }
  }
  {
    std::ofstream out(out_data);
    if (!out) throw DataError("cannot open '" + out_data + "'");
    out << "station_id,date,value_inches\n";
    for (const auto& r : data.records) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%s,%s,%.10g\n",
                    data.sites.sites[r.site].id.c_str(),
                    format_iso_date(r.date).c_str(), r.value);
      out << buf;
    }
  }
  if (!out_truth.empty()) write_truth(out_truth, truth, cfg.hash());
  std::cout << "simulated " << data.records.size() << " records at "
            << data.sites.size() << " stations\n";
  return 0;
}

int cmd_fit(const CommonArgs& common, const std::string& out_path) {
  const RunConfig cfg = load_config(common);
  ParseReport report;
  CleaningReport cleaning;
  const Dataset data = load_data(cfg, &report, &cleaning);
  print_parse_report(report, cleaning);
  const PipelineResult result = run_pipeline(data, cfg);
  write_fit_artifact(out_path, result, data, cfg);
  for (const auto& w : result.stage3.warnings) std::cout << "warning: " << w << "\n";
  std::cout << "fit written to " << out_path << "\n";
  return 0;
}

int cmd_predict(const CommonArgs& common, const std::string& artifact_path,
                const std::string& out_path, int year_start, int year_end) {
  const RunConfig cfg = load_config(common);
  const PipelineArtifact art = read_fit_artifact(artifact_path);
  if (year_start == 0 || year_end == 0)
    throw ConfigError("predict: --years start:end is required");
  std::vector<std::pair<int, Date>> targets;
  const int lo = serial_from_date(Date{year_start, 1, 1});
  const int hi = serial_from_date(Date{year_end, 12, 31});
  for (int s = 0; s < art.sites.size(); ++s)
    for (int d = lo; d <= hi; ++d) targets.emplace_back(s, date_from_serial(d));
  const QuantilePrediction pred = predict_quantile(
      cfg.alpha, art.stage2, art.stage3, art.thresholds, targets);
  write_predictions_csv(out_path, pred, art.sites, art.config_hash);
  long flagged = 0;
  for (const auto& d : pred.daily) flagged += d.below_threshold_flag ? 1 : 0;
  if (flagged > 0)
    std::cout << "warning: " << flagged
              << " daily cells flagged (alpha at or below threshold level)\n";
  std::cout << "predictions written to " << out_path << "\n";
  return 0;
}

int cmd_cv(const CommonArgs& common, const std::string& grid_name,
           const std::string& out_path, const std::string& folds_path) {
  const RunConfig cfg = load_config(common);
  ParseReport report;
  CleaningReport cleaning;
  const Dataset data = load_data(cfg, &report, &cleaning);
  print_parse_report(report, cleaning);
  const std::vector<SweepPoint> sweep = sweep_preset(grid_name, cfg);
  std::cout << "cv: " << sweep.size() << " configurations\n";
  const std::vector<CVResult> results =
      rank_models(sweep, data, cfg, cfg.engine.threads);
  write_cv_table(out_path, results, cfg.hash());
  if (!folds_path.empty()) write_cv_folds(folds_path, results, cfg.hash());
  std::cout << "cv table written to " << out_path << "\n";
  return 0;
}

int cmd_prior_table(const std::string& form_name, double lambda, double rate,
                    const std::string& out_path, int n, double xi_max) {
  PCPriorForm form;
  if (form_name == "exact")
    form = PCPriorForm::exact;
  else if (form_name == "exp" || form_name == "exponential")
    form = PCPriorForm::exponential;
  else
    throw ConfigError("prior-table: --form must be 'exact' or 'exp'");
  if (lambda <= 0.0 && rate <= 0.0)
    throw ConfigError("prior-table: provide --lambda or --rate");
  const double r = rate > 0.0 ? rate : std::sqrt(2.0) * lambda;
  if (xi_max <= 0.0)
    xi_max = form == PCPriorForm::exact ? 0.9999 : std::max(1.0, 40.0 / r);
  write_prior_table(out_path, form, r, n, xi_max);
  std::cout << "prior table written to " << out_path << "\n";
  return 0;
}

int cmd_report(const std::string& artifact_path, const std::string& out_dir,
               const std::string& cv_path) {
  const PipelineArtifact art = read_fit_artifact(artifact_path);
  write_report_tables(out_dir, art);
  if (!cv_path.empty()) {
    // re-emit the best five rows of an existing CV table
    std::ifstream in(cv_path);
    if (!in) throw DataError("cannot open CV table '" + cv_path + "'");
    std::string line;
    std::vector<std::string> rows;
    std::string header;
    while (std::getline(in, line)) {
      if (line.empty() || line.front() == '#') continue;
      if (header.empty()) {
        header = line;
        continue;
      }
      rows.push_back(line);
    }
    std::ofstream out(fs::path(out_dir) / "cv_best.csv");
    out << header << "\n";
    for (size_t i = 0; i < rows.size() && i < 5; ++i) out << rows[i] << "\n";
  }
  std::cout << "report tables written to " << out_dir << "\n";
  return 0;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"spatio-temporal extreme-quantile estimation"};
  app.require_subcommand(1);

  CommonArgs common;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "configuration file");
    sub->add_option("--set", common.overrides,
                    "override a key: section.key=value");
  };

  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  std::string sim_data = "data.csv", sim_sites = "sites.csv", sim_truth;
  add_common(sim);
  sim->add_option("--out-data", sim_data, "output data file");
  sim->add_option("--out-sites", sim_sites, "output site file");
  sim->add_option("--out-truth", sim_truth, "output truth record (JSON)");

  auto* fit = app.add_subcommand("fit", "fit the three-stage model");
  std::string fit_out = "fit.json";
  add_common(fit);
  fit->add_option("--out", fit_out, "output fit artifact");

  auto* predict = app.add_subcommand("predict", "monthly quantile predictions");
  std::string pred_artifact = "fit.json", pred_out = "predictions.csv";
  int pred_y0 = 0, pred_y1 = 0;
  add_common(predict);
  predict->add_option("--artifact", pred_artifact, "fit artifact");
  predict->add_option("--out", pred_out, "output CSV");
  predict->add_option("--year-start", pred_y0, "first target year")
      ->required();
  predict->add_option("--year-end", pred_y1, "last target year")->required();

  auto* cv = app.add_subcommand("cv", "cross-validation sweep");
  std::string cv_grid = "single", cv_out = "cv_table.csv", cv_folds;
  add_common(cv);
  cv->add_option("--grid", cv_grid, "sweep preset: single | mini | paper");
  cv->add_option("--out", cv_out, "output CV table");
  cv->add_option("--folds", cv_folds, "optional per-fold output table");

  auto* pt = app.add_subcommand("prior-table", "tail-index prior densities");
  std::string pt_form = "exp", pt_out = "prior_table.csv";
  double pt_lambda = 0.0, pt_rate = 0.0, pt_xi_max = 0.0;
  int pt_n = 20001;
  pt->add_option("--form", pt_form, "exact | exp");
  pt->add_option("--lambda", pt_lambda, "penalization rate lambda");
  pt->add_option("--rate", pt_rate, "rate tilde-lambda = sqrt(2) lambda");
  pt->add_option("--out", pt_out, "output CSV");
  pt->add_option("--n", pt_n, "number of grid points");
  pt->add_option("--xi-max", pt_xi_max, "upper end of the xi grid");

  auto* rep = app.add_subcommand("report", "effect summaries from a fit");
  std::string rep_artifact = "fit.json", rep_dir = "report", rep_cv;
  rep->add_option("--artifact", rep_artifact, "fit artifact");
  rep->add_option("--out-dir", rep_dir, "output directory");
  rep->add_option("--cv", rep_cv, "CV table to summarize");

  CLI11_PARSE(app, argc, argv);

  if (sim->parsed()) return cmd_simulate(common, sim_data, sim_sites, sim_truth);
  if (fit->parsed()) return cmd_fit(common, fit_out);
  if (predict->parsed())
    return cmd_predict(common, pred_artifact, pred_out, pred_y0, pred_y1);
  if (cv->parsed()) return cmd_cv(common, cv_grid, cv_out, cv_folds);
  if (pt->parsed())
    return cmd_prior_table(pt_form, pt_lambda, pt_rate, pt_out, pt_n,
                           pt_xi_max);
  if (rep->parsed()) return cmd_report(rep_artifact, rep_dir, rep_cv);
  return 1;
}

void emit_error(const char* kind, const std::exception& e) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = e.what();
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ConfigError& e) {
    emit_error("config", e);
    return 2;
  } catch (const DataError& e) {
    emit_error("data", e);
    return 3;
  } catch (const ConvergenceError& e) {
    emit_error("convergence", e);
    return 4;
  } catch (const std::exception& e) {
    emit_error("internal", e);
    return 1;
  }
}
