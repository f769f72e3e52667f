// Shared toy latent-Gaussian models for engine tests and their brute-force
// oracles (nested quadrature over low-dimensional latents and hypers).
// The oracles integrate the model's own likelihood terms exactly, so they
// check the engine's Laplace/grid machinery, not the likelihood formulas
// (those are validated separately against hand values and finite
// differences).
#pragma once

#include "quadrature.hpp"

#include "tailreg/laplace.hpp"
#include "tailreg/pc_priors.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace testmodels {

using tailreg::Family;
using tailreg::FamilyHyper;
using tailreg::HyperParam;
using tailreg::LatentGaussianModel;
using tailreg::Mat;
using tailreg::PrecisionBlock;
using tailreg::SpMat;
using tailreg::Vec;

inline PrecisionBlock scalar_block(const std::string& name, double unit_prec,
                                   int scale_theta = -1) {
  PrecisionBlock b;
  b.name = name;
  b.unit = Mat::Constant(1, 1, unit_prec);
  b.logdet_unit = std::log(unit_prec);
  b.rank_deficiency = 0;
  b.scale_theta = scale_theta;
  return b;
}

inline SpMat rows_to_groups(const std::vector<int>& group_of_row, int dim) {
  std::vector<Eigen::Triplet<double>> trip;
  for (int r = 0; r < static_cast<int>(group_of_row.size()); ++r)
    trip.emplace_back(r, group_of_row[r], 1.0);
  SpMat a(static_cast<int>(group_of_row.size()), dim);
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

// G independent scalar effects with n/G observations each. If free_tau, one
// shared log-precision hyperparameter (theta index 0) with a Gamma(10, 2)
// prior scales every block; otherwise the precision is fixed at tau_fixed.
inline LatentGaussianModel group_model(Family family, const Vec& y, int groups,
                                       bool free_tau, double tau_fixed = 1.0) {
  const int n_per = static_cast<int>(y.size()) / groups;
  LatentGaussianModel m;
  for (int g = 0; g < groups; ++g)
    m.structure.blocks.push_back(scalar_block(
        "x" + std::to_string(g), free_tau ? 1.0 : tau_fixed,
        free_tau ? 0 : -1));
  std::vector<int> group_of_row(y.size());
  for (int i = 0; i < static_cast<int>(y.size()); ++i)
    group_of_row[i] = std::min(i / n_per, groups - 1);
  m.structure.obs_matrix = rows_to_groups(group_of_row, groups);
  m.likelihood.family = family;
  m.likelihood.y = y;
  if (free_tau) {
    const tailreg::PrecisionPrior prior(10.0, 2.0);  // tau ~ Gamma(10, 2)
    HyperParam tau;
    tau.name = "tau";
    tau.log_prior = [prior](double t) { return prior.logpdf_log_tau(t); };
    tau.init = std::log(5.0);
    m.hyper.push_back(std::move(tau));
  }
  return m;
}

namespace detail {

// log integral over one group effect of exp(loglik terms + Gaussian prior),
// with or without the prior normalizing constant, plus optionally an x
// weight in the integrand (for posterior means).
struct GroupIntegral {
  double log_z;
  double mean;
};

inline GroupIntegral integrate_group(const LatentGaussianModel& m,
                                     const Vec& theta, int group,
                                     double x_span) {
  const int groups = m.dim();
  const int n = static_cast<int>(m.likelihood.y.size());
  const int n_per = n / groups;
  const FamilyHyper hyper = m.likelihood.hyper_at(theta);
  const auto& b = m.structure.blocks[group];
  const double tau =
      (b.scale_theta >= 0 ? std::exp(theta(b.scale_theta)) : 1.0) *
      b.unit(0, 0);
  auto joint = [&](double x) {
    double ll = -0.5 * tau * x * x +
                0.5 * std::log(tau / (2.0 * tailreg::kPi));
    for (int i = group * n_per; i < (group + 1) * n_per; ++i) {
      const double off =
          m.likelihood.offset.size() > 0 ? m.likelihood.offset(i) : 0.0;
      ll += tailreg::predictor_derivs(m.likelihood.y(i), m.likelihood.family,
                                      x, hyper, off)
                .loglik;
    }
    return ll;
  };
  // coarse peak search, then hill-climb refinement
  double peak = joint(0.0);
  double arg = 0.0;
  for (double x = -4.0; x <= 4.0; x += 0.25) {
    const double v = joint(x);
    if (v > peak) {
      peak = v;
      arg = x;
    }
  }
  double h = 0.25;
  while (h > 1e-5) {
    const double up = joint(arg + h), down = joint(arg - h);
    if (up > peak) {
      arg += h;
      peak = up;
    } else if (down > peak) {
      arg -= h;
      peak = down;
    } else {
      h *= 0.5;
    }
  }
  // integration window from the local curvature
  const double hc = 1e-3;
  const double d2 = (joint(arg + hc) - 2.0 * peak + joint(arg - hc)) /
                    (hc * hc);
  const double sd = 1.0 / std::sqrt(std::max(-d2, 1e-6));
  const double span = std::min(std::max(10.0 * sd, 1e-2), x_span);
  const double z = oracle::integrate(
      [&](double x) { return std::exp(joint(x) - peak); }, arg - span,
      arg + span, 1e-10, 60, 16);
  const double zx = oracle::integrate(
      [&](double x) { return x * std::exp(joint(x) - peak); }, arg - span,
      arg + span, 1e-10, 60, 16);
  return {peak + std::log(z), zx / z};
}

}  // namespace detail

// Exact log pi(y, theta) (up to the common constant) for a group model, by
// per-group 1-d quadrature; groups factorize.
inline double group_model_log_evidence(const LatentGaussianModel& m,
                                       const Vec& theta, double x_span = 12.0) {
  double total = 0.0;
  for (int j = 0; j < m.n_theta(); ++j)
    total += m.hyper[j].log_prior(theta(j));
  for (int g = 0; g < m.dim(); ++g)
    total += detail::integrate_group(m, theta, g, x_span).log_z;
  return total;
}

// Exact posterior means E[x_g | y, theta] at fixed theta.
inline Vec group_model_conditional_means(const LatentGaussianModel& m,
                                         const Vec& theta,
                                         double x_span = 12.0) {
  Vec means(m.dim());
  for (int g = 0; g < m.dim(); ++g)
    means(g) = detail::integrate_group(m, theta, g, x_span).mean;
  return means;
}

}  // namespace testmodels
