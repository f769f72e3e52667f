// Run configuration: a sectioned key=value text file with defaults for every
// key, plus the cleaning-rule and simulation settings. The canonical dump of
// a configuration is hashed into every emitted artifact.
#pragma once

#include "tailreg/calendar.hpp"
#include "tailreg/laplace.hpp"
#include "tailreg/pc_priors.hpp"
#include "tailreg/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tailreg {

enum class CleaningRuleType { drop_station, drop_constant_runs, drop_range };

struct CleaningRule {
  CleaningRuleType type;
  std::vector<std::string> station_ids;  // drop_station / drop_range filter
  int min_run = 0;                       // drop_constant_runs
  Date from, to;                         // drop_range (inclusive)
  std::string describe() const;
};

struct PriorSettings {
  PCPriorForm xi_prior_form = PCPriorForm::exponential;
  double xi_prior_rate = 15.0;
  double shape_prior_shape = 2.0;
  double shape_prior_mean = 1.0;
  double precision_prior_shape = 1.0;
  double precision_prior_inverse_scale = 5e-5;
};

struct SimulateSettings {
  int n_stations = 10;
  int start_year = 1972;
  int n_years = 10;
  double region_km = 300.0;
  double k = 2.0;
  double xi = 0.2;
  double p_wet = 0.5;
  double beta0_gamma = -1.0;
  double gamma_spatial_amp = 0.3;
  double gamma_weekly_amp = 0.3;
  double beta0_gp = 0.0;
  double gp_spatial_amp = 0.0;
  double gp_weekly_amp = 0.0;
};

struct RunConfig {
  // [data]
  std::string data_path;
  std::string site_path;

  // [model]
  double p_plus = 0.92;
  double psi_km = 50.0;
  double sigma_t = 0.010;  // tau_t = sigma_t^-2
  double alpha = 0.998;
  double q = 0.5;
  double intercept_variance = 1000.0;

  PriorSettings priors;
  EngineOptions engine;

  // [pipeline]
  int min_exceedances = 30;
  int warn_exceedances = 200;

  // [cv]
  std::string cv_axis = "station";
  double cv_alpha = 0.998;
  int cv_year_start = 0;  // 0 = derive from data
  int cv_year_end = 0;
  std::vector<std::string> cv_eval_stations;  // empty = all observed stations

  std::vector<CleaningRule> cleaning;
  SimulateSettings sim;

  // [run]
  std::uint64_t seed = 20240101;
  std::string output_dir = "out";

  double tau_t() const { return 1.0 / (sigma_t * sigma_t); }

  // Every key in a fixed order with full precision; basis of the config hash.
  std::string canonical_text() const;
  std::string hash() const;  // FNV-1a 64 of canonical_text(), hex

  void apply_override(const std::string& dotted_key, const std::string& value);
  void validate() const;

  static RunConfig from_text(const std::string& text);
  static RunConfig from_file(const std::string& path);
};

}  // namespace tailreg
