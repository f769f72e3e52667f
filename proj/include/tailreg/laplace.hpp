// Inference core for latent Gaussian models: Newton-Raphson Gaussian
// approximation of pi(x | theta, y), Laplace approximation of pi(theta | y)
// explored over a mode-centered grid, and mixture-of-Gaussians posterior
// summaries for latent components and hyperparameters.
#pragma once

#include "tailreg/distributions.hpp"
#include "tailreg/latent_effects.hpp"
#include "tailreg/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace tailreg {

// A free hyperparameter, handled on a log-transformed scale. log_prior is the
// density on the transformed scale (Jacobian included); natural() maps a
// transformed value back for reporting.
struct HyperParam {
  std::string name;
  std::function<double(double)> log_prior;
  double init = 0.0;
  std::function<double(double)> natural = [](double t) { return std::exp(t); };
};

// Observation model: y_i | eta_i with eta = A x + offset per datum.
// Family hyperparameters may be wired to free theta components (indices) or
// fixed.
struct LikelihoodSpec {
  Family family = Family::gaussian;
  Vec y;
  Vec offset;               // empty means all-zero
  int shape_theta = -1;     // gamma: index of log k in theta
  double fixed_shape = 1.0;
  int xi_theta = -1;        // gp: index of log xi in theta
  double fixed_xi = 0.0;
  double q = 0.5;           // gp quantile level
  double gaussian_precision = 1.0;

  FamilyHyper hyper_at(const Vec& theta) const;
};

struct LatentGaussianModel {
  ModelStructure structure;
  LikelihoodSpec likelihood;
  std::vector<HyperParam> hyper;

  int dim() const { return structure.dim(); }
  int n_theta() const { return static_cast<int>(hyper.size()); }
};

struct EngineOptions {
  double newton_tol = 1e-8;     // max-norm of the gradient at the mode
  int newton_max_iter = 100;
  double grid_step = 0.75;      // grid step in posterior-SD units
  double edge_drop = 6.0;       // stop expanding once edge log-density drops this far
  int max_grid_points = 10000;
  double hessian_step = 0.02;
  double nm_tol = 1e-7;
  int nm_max_iter = 800;
  int threads = 0;              // 0 = hardware concurrency
};

struct NewtonIter {
  int iter;
  double objective;
  double grad_norm;
  double step_scale;
};

// Gaussian approximation of pi(x | theta, y) by mode and curvature, with any
// linear constraints applied by conditioning (kriging).
struct GaussianApprox {
  Vec mode;                  // constrained mode
  Vec mode_unconstrained;    // Newton mode before constraint correction
  Mat precision;             // Q(theta_x) + A' diag(c) A at the Newton mode
  double logdet_constrained; // log det of the precision on the constraint complement
  double loglik;             // sum of log-likelihood terms at `mode`
  double quad;               // mode' Q mode
  int iterations = 0;
  std::uint64_t clamp_count = 0;
  int curvature_clamps = 0;  // negative c_i clamped to zero
  std::vector<NewtonIter> trace;
};

GaussianApprox newton_mode(const LatentGaussianModel& model, const Vec& theta,
                           const Vec& init, const EngineOptions& opts = {});

// Unnormalized log pi(theta | y) via the Laplace identity
//   log pi(y, x*, theta) - log pi_G(x* | theta, y),
// evaluated at the constrained mode x*. Generalized prior log-determinants
// are taken on the constraint-orthogonal complement.
double log_post_hyper(const LatentGaussianModel& model, const Vec& theta,
                      const EngineOptions& opts = {},
                      GaussianApprox* approx_out = nullptr,
                      const Vec* init = nullptr);

struct GridPoint {
  Vec theta;
  Eigen::VectorXi z;    // lattice coordinates in standardized theta-space
  double log_post = 0.0;
  double weight = 0.0;
  Vec mean;             // constrained latent means at this theta
  Vec sd;               // constrained latent standard deviations
};

struct HyperGrid {
  std::vector<GridPoint> points;
  Vec theta_mode;
  Mat hessian;          // of log_post_hyper at the mode (transformed scale)
  double log_post_max = 0.0;
  double edge_mass = 0.0;  // total weight on the boundary of the final box
  std::uint64_t clamp_count = 0;
  int curvature_clamps = 0;
  int newton_iter_max = 0;
};

// Mode-centered lattice in standardized theta-space, expanded until every
// boundary point is at least edge_drop log-units below the maximum. Weights
// are normalized exp(log_post_hyper). Throws ConvergenceError if the cap on
// grid points is exceeded.
HyperGrid explore_grid(const LatentGaussianModel& model,
                       const EngineOptions& opts = {});

struct PosteriorSummary {
  std::vector<std::string> names;
  Vec mean;
  Vec sd;
  Vec lower;  // central 95% interval
  Vec upper;

  int size() const { return static_cast<int>(names.size()); }
};

// Mixture-of-Gaussians marginals over the grid: exact mixture moments and
// numerically inverted mixture quantiles.
PosteriorSummary latent_marginals(const LatentGaussianModel& model,
                                  const HyperGrid& grid);

// Marginalize grid weights over the other axes; moments on the natural scale
// and quantiles from an interpolated marginal density.
PosteriorSummary hyper_marginals(const LatentGaussianModel& model,
                                 const HyperGrid& grid);

struct FitDiagnostics {
  int grid_size = 0;
  double edge_mass = 0.0;
  int newton_iter_max = 0;
  std::uint64_t clamp_count = 0;
  int curvature_clamps = 0;
  Vec theta_mode;
};

struct LaplaceFit {
  HyperGrid grid;
  PosteriorSummary latent;
  PosteriorSummary hyper;
  FitDiagnostics diag;
};

LaplaceFit fit_latent_gaussian(const LatentGaussianModel& model,
                               const EngineOptions& opts = {});

}  // namespace tailreg
