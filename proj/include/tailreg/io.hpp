// Data ingestion and cleaning, artifact serialization, and report tables.
//
// File formats (all UTF-8 delimited text; lines starting with '#' ignored):
//   data file:    station_id,date,value_inches       (header required)
//   site file:    station_id,x_km,y_km               (header required)
//   predictions:  station_id,year,month,alpha,quantile_inches
//   CV table:     model_id,psi_km,sigma_t,p_plus,cv_space,cv_time,cv_spacetime
// Fit artifacts are JSON and embed the config hash and tool version.
#pragma once

#include "tailreg/config.hpp"
#include "tailreg/evaluation.hpp"
#include "tailreg/pipeline.hpp"

#include <string>
#include <utility>
#include <vector>

namespace tailreg {

struct ParseReport {
  long total_rows = 0;
  long accepted = 0;
  std::vector<std::pair<long, std::string>> rejected;  // line number, reason
};

SiteSet read_sites(const std::string& path);

Dataset ingest(const std::string& data_path, const std::string& site_path,
               ParseReport* report = nullptr);

struct CleaningReport {
  std::vector<std::pair<std::string, long>> removed;  // rule description, rows
  long total_removed = 0;
};

// Applies the rules in order; each rule is a pure row filter.
Dataset clean(const Dataset& data, const std::vector<CleaningRule>& rules,
              CleaningReport* report = nullptr);

// Everything needed to predict from a persisted fit.
struct PipelineArtifact {
  std::string config_hash;
  std::string version;
  double alpha = 0.998;
  SiteSet sites;
  StageFit stage1;
  StageFit stage2;
  StageFit stage3;
  ThresholdSurface thresholds;
};

void write_fit_artifact(const std::string& path, const PipelineResult& result,
                        const Dataset& data, const RunConfig& config);
PipelineArtifact read_fit_artifact(const std::string& path);

void write_predictions_csv(const std::string& path,
                           const QuantilePrediction& pred,
                           const SiteSet& sites, const std::string& config_hash);

void write_cv_table(const std::string& path,
                    const std::vector<CVResult>& results,
                    const std::string& config_hash);
void write_cv_folds(const std::string& path,
                    const std::vector<CVResult>& results,
                    const std::string& config_hash);

// Density table (xi, density) for either PC prior form.
void write_prior_table(const std::string& path, PCPriorForm form, double rate,
                       int n_points, double xi_max);

// Effect summaries and threshold table from a fit artifact, as data files in
// out_dir: spatial_effects.csv, weekly_effects.csv, hyperparameters.csv,
// thresholds.csv.
void write_report_tables(const std::string& out_dir,
                         const PipelineArtifact& artifact);

}  // namespace tailreg
