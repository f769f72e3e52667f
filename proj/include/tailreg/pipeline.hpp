// Three-stage tail regression: Gamma fit on positive intensities, threshold
// surface from its quantiles, Bernoulli exceedance fit over all days, GP fit
// on excesses with the Gamma predictor as offset, and extreme-quantile
// composition with monthly aggregation.
#pragma once

#include "tailreg/calendar.hpp"
#include "tailreg/config.hpp"
#include "tailreg/laplace.hpp"
#include "tailreg/latent_effects.hpp"

#include <string>
#include <vector>

namespace tailreg {

struct Observation {
  int site = 0;        // index into Dataset::sites
  int day_serial = 0;  // days since 1970-01-01
  Date date;
  double value = 0.0;  // daily precipitation, inches; >= 0, zeros are dry days
};

struct Dataset {
  SiteSet sites;
  std::vector<Observation> records;  // sorted by (site, day_serial)

  std::vector<int> years() const;  // distinct calendar years, ascending
};

// Validates invariants (known sites, values >= 0, no duplicate station-day)
// and sorts records.
Dataset make_dataset(SiteSet sites, std::vector<Observation> records);

// Per-(station, week) threshold u > 0.
struct ThresholdSurface {
  double p_plus = 0.0;
  Mat u;  // n_sites x 52
  std::string provenance;  // fit id of the stage-1 fit that produced it
};

struct StageFit {
  std::string stage;  // "gamma" | "bernoulli" | "gp"
  PosteriorSummary latent;  // [intercept | sites | weeks]
  PosteriorSummary hyper;
  FitDiagnostics diag;
  int n_sites = 0;
  int n_weeks = 52;
  long n_obs = 0;      // observations entering this stage's likelihood
  double gp_q = 0.5;   // gp stage: quantile level of the parametrization
  Mat offset;          // gp stage: log mu_hat per (site, week); empty otherwise
  std::vector<std::string> warnings;

  // Posterior-mean linear predictor; week in 1..52.
  double predictor(int site, int week) const;
  double hyper_mean(const std::string& name) const;
};

StageFit fit_stage1_gamma(const Dataset& data, const RunConfig& config);

// u(s, w) = gamma_quantile(p_plus; mu = exp(predictor), k = posterior mean
// shape).
ThresholdSurface compute_threshold(const StageFit& stage1, double p_plus);

// Exceedance indicators over all days (wet and dry), logit link.
StageFit fit_stage2_bernoulli(const Dataset& data,
                              const ThresholdSurface& thresholds,
                              const RunConfig& config);

// GP on positive excesses y - u with log kappa_q = log mu_hat + eta.
StageFit fit_stage3_gp(const Dataset& data, const ThresholdSurface& thresholds,
                       const StageFit& stage1, const RunConfig& config);

// Overall alpha-quantile composed from the exceedance probability and the GP
// excess law:
//   y_alpha = u + kappa_q [r^-xi - 1] / [(1-q)^-xi - 1],  r = (1-alpha)/p_u
// (log-ratio form when xi = 0). Requires alpha > 1 - p_u.
double compose_quantile(double alpha, double u, double p_u, double kappa_q,
                        double q, double xi);

struct DailyPrediction {
  int site;
  Date date;
  double value;  // NaN when flagged
  bool below_threshold_flag;  // alpha <= 1 - p_u at this cell
};

struct MonthlyPrediction {
  int site;
  int year;
  int month;
  double value;  // arithmetic mean of the month's daily predictions
  int n_days;
  int n_flagged;
};

struct QuantilePrediction {
  double alpha = 0.0;
  std::vector<DailyPrediction> daily;
  std::vector<MonthlyPrediction> monthly;
};

QuantilePrediction predict_quantile(
    double alpha, const StageFit& stage2, const StageFit& stage3,
    const ThresholdSurface& thresholds,
    const std::vector<std::pair<int, Date>>& targets);

struct PipelineResult {
  StageFit stage1;
  StageFit stage2;
  StageFit stage3;
  ThresholdSurface thresholds;
  QuantilePrediction prediction;
};

// Stages only (no prediction); the building block for cross-validation.
struct StageFits {
  StageFit stage1;
  StageFit stage2;
  StageFit stage3;
  ThresholdSurface thresholds;
};

StageFits run_stages(const Dataset& data, const RunConfig& config);

// Full pipeline: stages plus predictions for every site over the data's
// calendar span.
PipelineResult run_pipeline(const Dataset& data, const RunConfig& config);

}  // namespace tailreg
