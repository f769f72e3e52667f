// Test oracle: a plain Nelder-Mead maximizer, independent of the library's
// optimizers, used to cross-check Newton mode finding.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <functional>
#include <vector>

namespace oracle {

inline Eigen::VectorXd nelder_mead_max(
    const std::function<double(const Eigen::VectorXd&)>& f,
    Eigen::VectorXd x0, double scale = 0.5, double tol = 1e-12,
    int max_iter = 20000) {
  const int n = static_cast<int>(x0.size());
  std::vector<Eigen::VectorXd> p(n + 1, x0);
  std::vector<double> v(n + 1);
  for (int i = 0; i < n; ++i) p[i + 1](i) += scale;
  for (int i = 0; i <= n; ++i) v[i] = -f(p[i]);

  for (int iter = 0; iter < max_iter; ++iter) {
    int lo = 0, hi = 0, hi2 = 0;
    for (int i = 1; i <= n; ++i) {
      if (v[i] < v[lo]) lo = i;
      if (v[i] > v[hi]) hi = i;
    }
    hi2 = lo;
    for (int i = 0; i <= n; ++i)
      if (i != hi && v[i] > v[hi2]) hi2 = i;
    if (std::abs(v[hi] - v[lo]) < tol * (1.0 + std::abs(v[lo]))) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i <= n; ++i)
      if (i != hi) centroid += p[i];
    centroid /= n;

    Eigen::VectorXd xr = centroid + (centroid - p[hi]);
    double vr = -f(xr);
    if (vr < v[lo]) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - p[hi]);
      const double ve = -f(xe);
      if (ve < vr) {
        p[hi] = xe;
        v[hi] = ve;
      } else {
        p[hi] = xr;
        v[hi] = vr;
      }
    } else if (vr < v[hi2]) {
      p[hi] = xr;
      v[hi] = vr;
    } else {
      Eigen::VectorXd xc = centroid + 0.5 * (p[hi] - centroid);
      const double vc = -f(xc);
      if (vc < v[hi]) {
        p[hi] = xc;
        v[hi] = vc;
      } else {
        for (int i = 0; i <= n; ++i) {
          if (i == lo) continue;
          p[i] = p[lo] + 0.5 * (p[i] - p[lo]);
          v[i] = -f(p[i]);
        }
      }
    }
  }
  int lo = 0;
  for (int i = 1; i <= n; ++i)
    if (v[i] < v[lo]) lo = i;
  return p[lo];
}

}  // namespace oracle
