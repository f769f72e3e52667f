// Quantile-loss cross-validation: hold-out-station and hold-out-year refits
// evaluated on a configurable station set, and model ranking over a
// (psi, sigma_t, p_plus) sweep.
#pragma once

#include "tailreg/config.hpp"
#include "tailreg/pipeline.hpp"

#include <string>
#include <vector>

namespace tailreg {

// alpha (y - q) above the prediction, (1 - alpha)(q - y) at or below it;
// minimized in expectation by the true alpha-quantile.
double quantile_loss(double y, double qhat, double alpha);

enum class HoldoutAxis { station, year };

struct CVPlan {
  HoldoutAxis axis = HoldoutAxis::station;
  std::vector<int> eval_sites;  // evaluation station set (site indices)
  std::vector<int> years;       // folds when axis == year
  double alpha = 0.998;
};

CVPlan make_cv_plan(const Dataset& data, const RunConfig& config,
                    HoldoutAxis axis);

struct FoldOutcome {
  std::string fold;
  double loss = 0.0;
  long n_obs = 0;
  bool ok = false;
  std::string error;
};

struct CVScore {
  double total = 0.0;
  std::vector<FoldOutcome> folds;
  double completeness = 1.0;  // fraction of folds that fitted
};

CVScore cv_space(const Dataset& data, const RunConfig& config,
                 const CVPlan& plan);
CVScore cv_time(const Dataset& data, const RunConfig& config,
                const CVPlan& plan);

struct SweepPoint {
  int id = 0;  // 1-based enumeration index
  double psi_km = 0.0;
  double sigma_t = 0.0;
  double p_plus = 0.0;
};

// Named sweep presets: "paper" is the full 10 x 5 x 10 grid (psi 25..250 km,
// sigma_t 0.005..0.025, p_plus 0.90..0.99, 500 configurations, sigma_t
// varying slowest and psi fastest); "mini" is a 2 x 3 x 2 = 12-point
// miniature; "single" is the configuration's own values.
std::vector<SweepPoint> sweep_preset(const std::string& name,
                                     const RunConfig& config);

struct CVResult {
  SweepPoint config;
  double space = 0.0;
  double time = 0.0;
  double spacetime = 0.0;  // space + time, exactly
  double completeness_space = 1.0;
  double completeness_time = 1.0;
  std::vector<FoldOutcome> folds_space;
  std::vector<FoldOutcome> folds_time;
};

// Refits every (sweep point x fold) and ranks ascending by the space-time
// criterion. (config x fold) tasks run concurrently; results are merged in
// sorted key order so output is scheduling-independent.
std::vector<CVResult> rank_models(const std::vector<SweepPoint>& sweep,
                                  const Dataset& data, const RunConfig& config,
                                  int threads = 0);

}  // namespace tailreg
