// Latent Gaussian building blocks: Matern spatial effect over stations,
// cyclic second-order random-walk weekly effect with sum-to-zero constraint,
// and assembly of the block precision and observation matrix.
#pragma once

#include "tailreg/calendar.hpp"
#include "tailreg/types.hpp"

#include <string>
#include <vector>

namespace tailreg {

struct Site {
  std::string id;
  double x_km = 0.0;
  double y_km = 0.0;
};

// Planar station coordinates in km; ids unique, coordinates finite.
struct SiteSet {
  std::vector<Site> sites;

  SiteSet() = default;
  explicit SiteSet(std::vector<Site> s);

  int size() const { return static_cast<int>(sites.size()); }
  int index_of(const std::string& id) const;  // -1 if unknown
  Mat distance_matrix() const;
};

struct MaternSpec {
  double psi_km;        // range
  double tau_s;         // precision
  double nu = 1.0;      // smoothness, fixed at 1
};

struct CyclicRW2Spec {
  int n_weeks = 52;
  double tau_t;         // innovation precision
};

// Matern correlation with nu = 1: (sqrt(2) h/psi) K_1(sqrt(2) h/psi),
// continuous at h = 0 where it equals 1.
double matern_correlation(double h_km, double psi_km);

// Inverse of tau_s^-1 [matern_correlation(||s_i - s_j||) + 1e-10 I].
// Throws DataError when the covariance cannot be factorized (duplicate or
// near-duplicate sites).
Mat build_spatial_precision(const MaternSpec& spec, const SiteSet& sites);

struct RW2Precision {
  Mat Q;           // tau_t * circulant(6,-4,1,ODDS...,1,-4), rank n-1
  Vec constraint;  // ones vector: sum-to-zero direction spanning the null space
};

RW2Precision build_rw2_precision(const CyclicRW2Spec& spec);

// Week in 1..52: ceil(day_of_year / 7), capped at 52 (the last "week" keeps
// days 365-366).
int week_of_day(const Date& date);

// One block of the latent prior precision Q(theta_x) = blockdiag of
// exp(theta[scale_theta]) * unit.
struct PrecisionBlock {
  std::string name;
  Mat unit;               // precision at unit scale
  double logdet_unit;     // generalized log-determinant of unit
  int rank_deficiency;    // null-space dimension (0 for proper blocks)
  int scale_theta = -1;   // index of the log-precision hyperparameter, -1 fixed
};

// Block precision, sparse observation map eta = A x, and linear equality
// constraints (rows of `constraints`, orthonormalized). Each constraint must
// span the null space of exactly one rank-deficient block; generalized
// log-determinants of the prior are taken on the constraint-orthogonal
// complement.
struct ModelStructure {
  std::vector<PrecisionBlock> blocks;
  SpMat obs_matrix;   // m x n
  Mat constraints;    // k x n, orthonormal rows (0 x 0 when none)

  int dim() const;
  Mat assemble_precision(const Vec& theta) const;
  // log det of Q(theta) on the constraint-orthogonal complement
  double logdet_prior(const Vec& theta) const;
};

// Latent layout [intercept | sites | weeks]; wiring of the scale
// hyperparameters into theta is given by the *_theta indices (-1 = fixed).
struct AssemblyOptions {
  double intercept_variance = 1000.0;
  int spatial_theta = -1;   // index of log tau_s in theta, if free
  int weekly_theta = -1;    // index of log tau_t in theta, if free
};

// One observation row loads the intercept, one site and one week with unit
// weights.
ModelStructure assemble_model(const MaternSpec& matern,
                              const CyclicRW2Spec& rw2, const SiteSet& sites,
                              const std::vector<std::pair<int, int>>& obs,
                              const AssemblyOptions& opts = {});

}  // namespace tailreg
