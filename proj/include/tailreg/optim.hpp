// Small numerical utilities: bracketed root finding, Nelder-Mead simplex
// search, and finite-difference Hessians.
#pragma once

#include "tailreg/types.hpp"

#include <functional>

namespace tailreg {

// Brent-Dekker root of f on [lo, hi]; f(lo) and f(hi) must bracket a sign
// change. Converges to |interval| < tol_abs + tol_rel*|x|.
double brent_root(const std::function<double(double)>& f, double lo, double hi,
                  double tol_rel = 1e-12, double tol_abs = 0.0,
                  int max_iter = 200);

struct NelderMeadResult {
  Vec x;
  double fmin = 0.0;
  int evaluations = 0;
  bool converged = false;
};

// Minimizes f starting from x0 with an axis-aligned initial simplex of the
// given edge length. Stops when the simplex function spread drops below tol.
NelderMeadResult nelder_mead(const std::function<double(const Vec&)>& f,
                             const Vec& x0, double scale = 0.5,
                             double tol = 1e-8, int max_iter = 2000);

// Central-difference Hessian of f at x.
Mat numeric_hessian(const std::function<double(const Vec&)>& f, const Vec& x,
                    double step = 0.05);

double normal_cdf(double z);

}  // namespace tailreg
