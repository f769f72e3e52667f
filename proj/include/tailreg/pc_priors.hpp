// Penalized-complexity priors for the GP tail index, built from the
// Kullback-Leibler distance of a GP model to the exponential base model,
// together with the remaining hyperparameter priors of the pipeline.
#pragma once

#include "tailreg/types.hpp"

namespace tailreg {

// KLD(GP(sigma, xi) || Exp(sigma)) = xi^2 / (1 - xi); scale-free.
double kld_gp_exp(double xi);

// d(xi) = sqrt(2 KLD) = sqrt(2) xi (1-xi)^(-1/2), the distance the prior
// penalizes at constant rate.
double pc_distance(double xi);

// Exact-form prior, support [0, 1):
//   pi(xi) = rate * exp{-rate * xi (1-xi)^(-1/2)} (1 - xi/2)(1 - xi)^(-3/2)
// with rate = sqrt(2) * lambda.
struct PCPriorExact {
  double lambda;
  explicit PCPriorExact(double lambda);
  double rate() const;
};

// Exponential approximation (KLD ~ xi^2 near 0), support [0, inf):
//   pi(xi) = rate * exp(-rate * xi)
struct PCPriorExp {
  double rate;
  explicit PCPriorExp(double rate);
};

double pdf_exact(double xi, const PCPriorExact& prior);  // 0 outside [0,1)
double pdf_exp(double xi, const PCPriorExp& prior);      // 0 below 0

// Pr(xi > xi0) under either form, at penalization rate = sqrt(2)*lambda.
double tail_prob_exact(double xi0, double rate);
double tail_prob_exp(double xi0, double rate);

enum class PCPriorForm { exact, exponential };

// Rate such that Pr(xi > xi0) = p0 under the chosen form, by monotone root
// finding to 1e-10 relative tolerance.
double elicit_rate(double xi0, double p0, PCPriorForm form);

// Gamma(shape 2, mean 1) prior on the Gamma likelihood's shape parameter.
struct GammaShapePrior {
  double shape = 2.0;
  double rate = 2.0;  // shape / mean
  double logpdf(double k) const;
  double mean() const { return shape / rate; }
  double mode() const { return (shape - 1.0) / rate; }
};

GammaShapePrior gamma_shape_prior();

// Gamma(shape, inverse_scale) prior on a precision tau, evaluated on the
// log-precision scale (Jacobian included).
struct PrecisionPrior {
  double shape;
  double inverse_scale;
  PrecisionPrior(double shape, double inverse_scale);
  double logpdf_log_tau(double log_tau) const;
};

// Log prior densities on the transformed (log) scales the engine grids over.
double log_prior_log_shape(double log_k, const GammaShapePrior& prior);
double log_prior_log_xi(double log_xi, PCPriorForm form, double rate);

}  // namespace tailreg
