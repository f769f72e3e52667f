#include "tailreg/optim.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace tailreg {

double brent_root(const std::function<double(double)>& f, double lo, double hi,
                  double tol_rel, double tol_abs, int max_iter) {
  double a = lo, b = hi;
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if (fa * fb > 0.0)
    throw ConvergenceError("brent_root: endpoints do not bracket a root");
  double c = a, fc = fa;
  double d = b - a, e = d;
  for (int iter = 0; iter < max_iter; ++iter) {
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol1 = 2.0 * std::numeric_limits<double>::epsilon() *
                            std::abs(b) +
                        0.5 * (tol_abs + tol_rel * std::abs(b));
    const double xm = 0.5 * (c - b);
    if (std::abs(xm) <= tol1 || fb == 0.0) return b;
    if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
      // inverse quadratic / secant step
      const double s = fb / fa;
      double p, q;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        const double qq = fa / fc;
        const double r = fb / fc;
        p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
        q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::abs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q),
                             std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += (std::abs(d) > tol1) ? d : (xm > 0 ? tol1 : -tol1);
    fb = f(b);
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = b - a;
      e = d;
    }
  }
  throw ConvergenceError("brent_root: iteration cap exceeded");
}

NelderMeadResult nelder_mead(const std::function<double(const Vec&)>& f,
                             const Vec& x0, double scale, double tol,
                             int max_iter) {
  const int n = static_cast<int>(x0.size());
  NelderMeadResult res;
  if (n == 0) {
    res.x = x0;
    res.fmin = f(x0);
    res.evaluations = 1;
    res.converged = true;
    return res;
  }

  std::vector<Vec> pts(n + 1, x0);
  std::vector<double> fv(n + 1);
  for (int i = 0; i < n; ++i) pts[i + 1](i) += scale;
  for (int i = 0; i <= n; ++i) fv[i] = f(pts[i]);
  res.evaluations = n + 1;

  const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
  std::vector<int> order(n + 1);
  for (int iter = 0; iter < max_iter; ++iter) {
    for (int i = 0; i <= n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return fv[a] < fv[b]; });
    const int best = order[0], worst = order[n], second = order[n - 1];
    if (std::abs(fv[worst] - fv[best]) <
        tol * (1.0 + std::abs(fv[best]))) {
      res.x = pts[best];
      res.fmin = fv[best];
      res.converged = true;
      return res;
    }

    Vec centroid = Vec::Zero(n);
    for (int i = 0; i <= n; ++i)
      if (i != worst) centroid += pts[i];
    centroid /= n;

    const Vec xr = centroid + alpha * (centroid - pts[worst]);
    const double fr = f(xr);
    ++res.evaluations;
    if (fr < fv[best]) {
      const Vec xe = centroid + gamma * (centroid - pts[worst]);
      const double fe = f(xe);
      ++res.evaluations;
      if (fe < fr) {
        pts[worst] = xe;
        fv[worst] = fe;
      } else {
        pts[worst] = xr;
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      pts[worst] = xr;
      fv[worst] = fr;
    } else {
      const Vec xc = centroid + rho * (pts[worst] - centroid);
      const double fc = f(xc);
      ++res.evaluations;
      if (fc < fv[worst]) {
        pts[worst] = xc;
        fv[worst] = fc;
      } else {
        for (int i = 0; i <= n; ++i) {
          if (i == best) continue;
          pts[i] = pts[best] + sigma * (pts[i] - pts[best]);
          fv[i] = f(pts[i]);
          ++res.evaluations;
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i <= n; ++i)
    if (fv[i] < fv[best]) best = i;
  res.x = pts[best];
  res.fmin = fv[best];
  res.converged = false;
  return res;
}

Mat numeric_hessian(const std::function<double(const Vec&)>& f, const Vec& x,
                    double step) {
  const int n = static_cast<int>(x.size());
  Mat h(n, n);
  const double f0 = f(x);
  for (int i = 0; i < n; ++i) {
    Vec xp = x, xm = x;
    xp(i) += step;
    xm(i) -= step;
    h(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (step * step);
    for (int j = i + 1; j < n; ++j) {
      Vec xpp = x, xpm = x, xmp = x, xmm = x;
      xpp(i) += step;
      xpp(j) += step;
      xpm(i) += step;
      xpm(j) -= step;
      xmp(i) -= step;
      xmp(j) += step;
      xmm(i) -= step;
      xmm(j) -= step;
      h(i, j) = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * step * step);
      h(j, i) = h(i, j);
    }
  }
  return h;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace tailreg
