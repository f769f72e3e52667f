// Test oracle: adaptive Simpson quadrature, independent of the library.
#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

namespace oracle {

namespace detail {

inline double simpson(const std::function<double(double)>& f, double a,
                      double fa, double b, double fb, double m, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adapt(const std::function<double(double)>& f, double a,
                    double fa, double b, double fb, double m, double fm,
                    double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(f, a, fa, m, fm, lm, flm);
  const double right = simpson(f, m, fm, b, fb, rm, frm);
  const double delta = left + right - whole;
  if (depth <= 0) throw std::runtime_error("adaptive simpson: depth exceeded");
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adapt(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         adapt(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson over [a, b], seeded with `panels` uniform panels so that
// narrow bumps inside a wide interval are not missed by the first samples.
inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double tol = 1e-11, int depth = 60,
                        int panels = 32) {
  double total = 0.0;
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h, hi = (p + 1 == panels) ? b : lo + h;
    const double m = 0.5 * (lo + hi);
    const double fa = f(lo), fb = f(hi), fm = f(m);
    const double whole = detail::simpson(f, lo, fa, hi, fb, m, fm);
    total +=
        detail::adapt(f, lo, fa, hi, fb, m, fm, whole, tol / panels, depth);
  }
  return total;
}

// Integral over [0, inf) via the substitution y = exp(w) - 1 (w in [0, W]).
inline double integrate_halfline(const std::function<double(double)>& f,
                                 double w_max = 200.0, double tol = 1e-11) {
  return integrate(
      [&](double w) {
        const double ew = std::exp(w);
        return f(ew - 1.0) * ew;
      },
      0.0, w_max, tol, 60, 64);
}

}  // namespace oracle
