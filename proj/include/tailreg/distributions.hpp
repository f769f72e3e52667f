// Response likelihoods for the three regression stages: generalized Pareto
// (scale and quantile parametrizations, xi >= 0), Gamma in mean-shape form,
// and Bernoulli, plus log-likelihood derivatives with respect to the linear
// predictor as needed by the Laplace engine. A Gaussian family is included
// as the exactly-tractable test case.
#pragma once

#include "tailreg/types.hpp"

namespace tailreg {

// Formula branch switch: at xi <= this bound the exponential-limit forms are
// used, with a second-order expansion of log(1 + xi*y/sigma)/xi so the two
// branches agree to ~1e-7 across the switch.
inline constexpr double kXiZeroBranch = 1e-8;

// Linear predictors are clamped to +-40 before exponentiation.
inline constexpr double kPredictorClamp = 40.0;

// GP distribution of positive excesses, survival (1 + xi*y/sigma)^(-1/xi).
struct GPScaleParam {
  double sigma;
  double xi;
  GPScaleParam(double sigma, double xi);
};

// GP reparametrized by its q-quantile kappa_q:
//   GP(y) = 1 - [1 + {(1-q)^(-xi) - 1} y/kappa_q]^(-1/xi)
struct GPQuantileParam {
  double kappa_q;
  double q;
  double xi;
  GPQuantileParam(double kappa_q, double q, double xi);
};

// Gamma with mean mu and shape k: k^k mu^-k Gamma(k)^-1 y^(k-1) exp(-k y/mu).
struct GammaMeanShape {
  double mu;
  double k;
  GammaMeanShape(double mu, double k);
};

struct BernoulliParam {
  double p;
  explicit BernoulliParam(double p);
};

struct PredictorDerivatives {
  double loglik;
  double d1;  // d log pi(y|eta) / d eta
  double d2;  // d^2 log pi(y|eta) / d eta^2, <= 0 for all supported families
};

double gp_survival(double y, const GPScaleParam& par);

// CDF / log-density / quantile in the (kappa_q, q, xi) parametrization.
double gp_cdf(double y, const GPQuantileParam& par);
double gp_logpdf(double y, const GPQuantileParam& par);
double gp_quantile(double alpha, const GPQuantileParam& par);

// Algebraic maps between the two GP parametrizations:
//   sigma = kappa_q * xi / {(1-q)^(-xi) - 1}   (xi > 0)
//   sigma = kappa_q / log{1/(1-q)}             (xi = 0)
GPScaleParam convert_params(const GPQuantileParam& par);
GPQuantileParam quantile_param(const GPScaleParam& par, double q);

double gamma_logpdf(double y, const GammaMeanShape& par);
double gamma_cdf(double y, const GammaMeanShape& par);

// p-quantile by bracketed root finding on the regularized incomplete gamma
// function, to 1e-10 relative tolerance. Throws ConvergenceError if the
// bracket search fails (malformed parameters).
double gamma_quantile(double p, const GammaMeanShape& par);

enum class Family { gaussian, gamma, bernoulli, gp };

// Likelihood hyperparameters; only the fields relevant to the family in use
// are read.
struct FamilyHyper {
  double gamma_shape = 1.0;       // Gamma k
  double gp_xi = 0.0;             // GP tail index
  double gp_q = 0.5;              // GP quantile level of the parametrization
  double gaussian_precision = 1.0;
};

// Log-likelihood of a single datum and its first two derivatives in eta.
// Links: gamma mu = exp(offset + eta), bernoulli p = logistic(offset + eta),
// gp kappa_q = exp(offset + eta), gaussian y ~ N(offset + eta, 1/precision).
// eta is clamped to +-40 (counted into *clamps when provided).
PredictorDerivatives predictor_derivs(double y, Family family, double eta,
                                      const FamilyHyper& hyper,
                                      double offset = 0.0,
                                      ClampCounter* clamps = nullptr);

}  // namespace tailreg
