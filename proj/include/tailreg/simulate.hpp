// Synthetic data generator: runs the three-stage generative model forward
// (dry days, Gamma body below the threshold, GP tail above it) and records
// the exact latent surfaces and per-cell extreme quantiles for testing.
#pragma once

#include "tailreg/config.hpp"
#include "tailreg/pipeline.hpp"

#include <random>
#include <string>
#include <utility>

namespace tailreg {

// True per-(site, week) surfaces implied by a SimulateSettings block.
struct TruthRecord {
  SiteSet sites;
  double k = 1.0;       // Gamma shape
  double xi = 0.0;      // tail index
  double q = 0.5;       // GP parametrization level
  double p_plus = 0.0;  // threshold level (quantile of the wet-day Gamma)
  double p_wet = 0.0;
  double alpha = 0.0;
  Mat mu;        // Gamma mean, n_sites x 52
  Mat u;         // threshold
  Mat p_u;       // overall exceedance probability
  Mat kappa;     // GP q-quantile
  Mat y_alpha;   // overall alpha-quantile per cell (the prediction target)
  Vec weekly_gamma;   // true weekly effect of the Gamma stage (length 52)
  Vec spatial_gamma;  // true spatial effect per site
};

TruthRecord make_truth(const SiteSet& sites, const RunConfig& config);

// One day's precipitation at (site, week): 0 with probability 1 - p_wet,
// otherwise Gamma truncated at u with probability p_plus or u + GP excess.
double simulate_cell_draw(const TruthRecord& truth, int site, int week,
                          std::mt19937_64& rng);

// Deterministically seeded site placement on [0, region]^2.
SiteSet simulated_sites(const SimulateSettings& sim, std::uint64_t seed);

// Full dataset over n_years of daily records at every station.
std::pair<Dataset, TruthRecord> simulate(const RunConfig& config);

void write_truth(const std::string& path, const TruthRecord& truth,
                 const std::string& config_hash);

}  // namespace tailreg
