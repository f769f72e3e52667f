#include "tailreg/pc_priors.hpp"

#include "tailreg/optim.hpp"

#include <cmath>

namespace tailreg {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::domain_error(msg);
}

const double kSqrt2 = std::sqrt(2.0);

}  // namespace

double kld_gp_exp(double xi) {
  require(xi >= 0.0 && xi < 1.0, "kld_gp_exp: xi must be in [0,1)");
  return xi * xi / (1.0 - xi);
}

double pc_distance(double xi) {
  return std::sqrt(2.0 * kld_gp_exp(xi));
}

PCPriorExact::PCPriorExact(double lambda) : lambda(lambda) {
  require(std::isfinite(lambda) && lambda > 0.0,
          "PCPriorExact: lambda must be > 0");
}

double PCPriorExact::rate() const { return kSqrt2 * lambda; }

PCPriorExp::PCPriorExp(double rate) : rate(rate) {
  require(std::isfinite(rate) && rate > 0.0, "PCPriorExp: rate must be > 0");
}

double pdf_exact(double xi, const PCPriorExact& prior) {
  if (xi < 0.0 || xi >= 1.0) return 0.0;
  const double rate = prior.rate();
  const double om = 1.0 - xi;
  return rate * std::exp(-rate * xi / std::sqrt(om)) * (1.0 - 0.5 * xi) /
         (om * std::sqrt(om));
}

double pdf_exp(double xi, const PCPriorExp& prior) {
  if (xi < 0.0) return 0.0;
  return prior.rate * std::exp(-prior.rate * xi);
}

double tail_prob_exact(double xi0, double rate) {
  require(xi0 >= 0.0 && xi0 < 1.0, "tail_prob_exact: xi0 must be in [0,1)");
  // The distance is exponential with the given rate, so the tail probability
  // is exp(-rate * xi0 / sqrt(1 - xi0)).
  return std::exp(-rate * xi0 / std::sqrt(1.0 - xi0));
}

double tail_prob_exp(double xi0, double rate) {
  require(xi0 >= 0.0, "tail_prob_exp: xi0 must be >= 0");
  return std::exp(-rate * xi0);
}

double elicit_rate(double xi0, double p0, PCPriorForm form) {
  require(p0 > 0.0 && p0 < 1.0, "elicit_rate: p0 must be in (0,1)");
  if (form == PCPriorForm::exact)
    require(xi0 > 0.0 && xi0 < 1.0, "elicit_rate: xi0 must be in (0,1)");
  else
    require(xi0 > 0.0, "elicit_rate: xi0 must be > 0");

  auto tail = [&](double rate) {
    return form == PCPriorForm::exact ? tail_prob_exact(xi0, rate)
                                      : tail_prob_exp(xi0, rate);
  };
  double lo = 1.0, hi = 1.0;
  int guard = 0;
  while (tail(lo) < p0) {
    lo *= 0.5;
    if (++guard > 2000)
      throw ConvergenceError("elicit_rate: lower bracket search failed");
  }
  guard = 0;
  while (tail(hi) > p0) {
    hi *= 2.0;
    if (++guard > 2000)
      throw ConvergenceError("elicit_rate: upper bracket search failed");
  }
  return brent_root([&](double r) { return tail(r) - p0; }, lo, hi, 1e-10);
}

double GammaShapePrior::logpdf(double k) const {
  require(k > 0.0, "GammaShapePrior: k must be > 0");
  return shape * std::log(rate) - std::lgamma(shape) +
         (shape - 1.0) * std::log(k) - rate * k;
}

GammaShapePrior gamma_shape_prior() { return GammaShapePrior{}; }

PrecisionPrior::PrecisionPrior(double shape, double inverse_scale)
    : shape(shape), inverse_scale(inverse_scale) {
  require(shape > 0.0 && inverse_scale > 0.0,
          "PrecisionPrior: parameters must be > 0");
}

double PrecisionPrior::logpdf_log_tau(double log_tau) const {
  // Gamma density in tau = exp(log_tau) times the Jacobian tau.
  return shape * std::log(inverse_scale) - std::lgamma(shape) +
         shape * log_tau - inverse_scale * std::exp(log_tau);
}

double log_prior_log_shape(double log_k, const GammaShapePrior& prior) {
  return prior.logpdf(std::exp(log_k)) + log_k;
}

double log_prior_log_xi(double log_xi, PCPriorForm form, double rate) {
  const double xi = std::exp(log_xi);
  double pdf;
  if (form == PCPriorForm::exact) {
    if (xi >= 1.0) return -std::numeric_limits<double>::infinity();
    pdf = pdf_exact(xi, PCPriorExact{rate / std::sqrt(2.0)});
  } else {
    pdf = pdf_exp(xi, PCPriorExp{rate});
  }
  return std::log(pdf) + log_xi;
}

}  // namespace tailreg
