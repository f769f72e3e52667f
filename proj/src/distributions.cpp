#include "tailreg/distributions.hpp"

#include "tailreg/optim.hpp"

#include <unsupported/Eigen/SpecialFunctions>

#include <algorithm>
#include <cmath>

namespace tailreg {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::domain_error(msg);
}

// (1-q)^(-xi) - 1, exact for small xi.
double quantile_slope(double xi, double q) {
  return std::expm1(-xi * std::log1p(-q));
}

}  // namespace

GPScaleParam::GPScaleParam(double sigma, double xi) : sigma(sigma), xi(xi) {
  require(std::isfinite(sigma) && sigma > 0.0, "GPScaleParam: sigma must be > 0");
  require(std::isfinite(xi) && xi >= 0.0, "GPScaleParam: xi must be >= 0");
}

GPQuantileParam::GPQuantileParam(double kappa_q, double q, double xi)
    : kappa_q(kappa_q), q(q), xi(xi) {
  require(std::isfinite(kappa_q) && kappa_q > 0.0,
          "GPQuantileParam: kappa_q must be > 0");
  require(q > 0.0 && q < 1.0, "GPQuantileParam: q must be in (0,1)");
  require(std::isfinite(xi) && xi >= 0.0, "GPQuantileParam: xi must be >= 0");
}

GammaMeanShape::GammaMeanShape(double mu, double k) : mu(mu), k(k) {
  require(std::isfinite(mu) && mu > 0.0, "GammaMeanShape: mu must be > 0");
  require(std::isfinite(k) && k > 0.0, "GammaMeanShape: k must be > 0");
}

BernoulliParam::BernoulliParam(double p) : p(p) {
  require(p > 0.0 && p < 1.0, "BernoulliParam: p must be in (0,1)");
}

double gp_survival(double y, const GPScaleParam& par) {
  require(y >= 0.0, "gp_survival: y must be >= 0");
  const double z = y / par.sigma;
  if (par.xi <= kXiZeroBranch) {
    // exp(-log1p(xi z)/xi) expanded to second order in the log
    return std::exp(-z * (1.0 - 0.5 * par.xi * z));
  }
  return std::exp(-std::log1p(par.xi * z) / par.xi);
}

double gp_cdf(double y, const GPQuantileParam& par) {
  require(y >= 0.0, "gp_cdf: y must be >= 0");
  const double b = -std::log1p(-par.q);
  if (par.xi <= kXiZeroBranch) {
    const double z = y / par.kappa_q;
    return -std::expm1(-b * z * (1.0 - 0.5 * par.xi * b * z));
  }
  const double w = quantile_slope(par.xi, par.q) * y / par.kappa_q;
  return -std::expm1(-std::log1p(w) / par.xi);
}

double gp_logpdf(double y, const GPQuantileParam& par) {
  require(y > 0.0, "gp_logpdf: y must be > 0");
  const double b = -std::log1p(-par.q);
  if (par.xi <= kXiZeroBranch) {
    return std::log(b) - std::log(par.kappa_q) - b * y / par.kappa_q;
  }
  const double c = quantile_slope(par.xi, par.q);
  const double w = c * y / par.kappa_q;
  return std::log(c) - std::log(par.xi) - std::log(par.kappa_q) -
         (1.0 / par.xi + 1.0) * std::log1p(w);
}

double gp_quantile(double alpha, const GPQuantileParam& par) {
  require(alpha > 0.0 && alpha < 1.0, "gp_quantile: alpha must be in (0,1)");
  const double b_alpha = -std::log1p(-alpha);
  const double b_q = -std::log1p(-par.q);
  if (par.xi <= kXiZeroBranch) return par.kappa_q * b_alpha / b_q;
  return par.kappa_q * std::expm1(par.xi * b_alpha) /
         std::expm1(par.xi * b_q);
}

GPScaleParam convert_params(const GPQuantileParam& par) {
  const double b_q = -std::log1p(-par.q);
  if (par.xi <= kXiZeroBranch) return {par.kappa_q / b_q, par.xi};
  return {par.kappa_q * par.xi / quantile_slope(par.xi, par.q), par.xi};
}

GPQuantileParam quantile_param(const GPScaleParam& par, double q) {
  const double b_q = -std::log1p(-q);
  if (par.xi <= kXiZeroBranch) return {par.sigma * b_q, q, par.xi};
  return {par.sigma * quantile_slope(par.xi, q) / par.xi, q, par.xi};
}

double gamma_logpdf(double y, const GammaMeanShape& par) {
  require(y > 0.0, "gamma_logpdf: y must be > 0");
  const double k = par.k;
  return k * std::log(k) - k * std::log(par.mu) - std::lgamma(k) +
         (k - 1.0) * std::log(y) - k * y / par.mu;
}

double gamma_cdf(double y, const GammaMeanShape& par) {
  require(y >= 0.0, "gamma_cdf: y must be >= 0");
  if (y == 0.0) return 0.0;
  return Eigen::numext::igamma(par.k, par.k * y / par.mu);
}

double gamma_quantile(double p, const GammaMeanShape& par) {
  require(p > 0.0 && p < 1.0, "gamma_quantile: p must be in (0,1)");
  // Solve P(k, x) = p in standardized units x = k y / mu.
  const double k = par.k;
  auto cdf = [k](double x) { return Eigen::numext::igamma(k, x); };
  double lo = k, hi = k;
  int guard = 0;
  while (cdf(lo) > p) {
    lo *= 0.125;
    if (++guard > 200)
      throw ConvergenceError("gamma_quantile: lower bracket search failed");
  }
  guard = 0;
  while (cdf(hi) < p) {
    hi *= 8.0;
    if (++guard > 200)
      throw ConvergenceError("gamma_quantile: upper bracket search failed");
  }
  const double x =
      brent_root([&](double v) { return cdf(v) - p; }, lo, hi, 1e-12);
  return par.mu * x / k;
}

PredictorDerivatives predictor_derivs(double y, Family family, double eta,
                                      const FamilyHyper& hyper, double offset,
                                      ClampCounter* clamps) {
  require(std::isfinite(eta), "predictor_derivs: eta must be finite");
  if (std::abs(eta) > kPredictorClamp) {
    eta = std::clamp(eta, -kPredictorClamp, kPredictorClamp);
    if (clamps) clamps->fetch_add(1, std::memory_order_relaxed);
  }
  const double lin = offset + eta;
  switch (family) {
    case Family::gaussian: {
      const double prec = hyper.gaussian_precision;
      const double r = y - lin;
      return {0.5 * std::log(prec / (2.0 * kPi)) - 0.5 * prec * r * r,
              prec * r, -prec};
    }
    case Family::gamma: {
      require(y > 0.0, "predictor_derivs(gamma): y must be > 0");
      const double k = hyper.gamma_shape;
      const double rel = y * std::exp(-lin);  // y / mu
      const double ll = k * std::log(k) - k * lin - std::lgamma(k) +
                        (k - 1.0) * std::log(y) - k * rel;
      return {ll, k * (rel - 1.0), -k * rel};
    }
    case Family::bernoulli: {
      const double p = 1.0 / (1.0 + std::exp(-lin));
      const double ll = y * lin - (lin > 0.0
                                       ? lin + std::log1p(std::exp(-lin))
                                       : std::log1p(std::exp(lin)));
      return {ll, y - p, -p * (1.0 - p)};
    }
    case Family::gp: {
      require(y > 0.0, "predictor_derivs(gp): excess must be > 0");
      const double xi = hyper.gp_xi;
      const double b = -std::log1p(-hyper.gp_q);
      if (xi <= kXiZeroBranch) {
        const double w = b * y * std::exp(-lin);
        return {std::log(b) - lin - w, -1.0 + w, -w};
      }
      const double a = 1.0 + 1.0 / xi;
      const double xib = xi * b;
      // log of (1-q)^-xi - 1, stable for extreme xi probed by optimizers
      const double log_c =
          xib > 30.0 ? xib : std::log(std::expm1(xib));
      const double log_w = log_c + std::log(y) - lin;
      if (log_w > 33.0) {  // w would overflow the direct path
        const double emw = std::exp(-log_w);
        return {log_c - std::log(xi) - lin - (1.0 / xi + 1.0) * log_w,
                -1.0 + a * (1.0 - emw), -a * emw};
      }
      const double w = std::exp(log_w);
      const double t = w / (1.0 + w);
      return {log_c - std::log(xi) - lin - (1.0 / xi + 1.0) * std::log1p(w),
              -1.0 + a * t, -a * t / (1.0 + w)};
    }
  }
  throw std::logic_error("predictor_derivs: unknown family");
}

}  // namespace tailreg
