#include "tailreg/laplace.hpp"

#include "tailreg/optim.hpp"
#include "tailreg/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>

namespace tailreg {

namespace {

struct LikelihoodEval {
  double loglik = 0.0;
  Vec d1;
  Vec curvature;  // c_i = -d2_i, clamped at 0
  std::uint64_t clamps = 0;
  int curvature_clamps = 0;
};

LikelihoodEval eval_likelihood(const LatentGaussianModel& model,
                               const FamilyHyper& hyper, const Vec& eta) {
  const auto& lik = model.likelihood;
  const int m = static_cast<int>(lik.y.size());
  LikelihoodEval ev;
  ev.d1.resize(m);
  ev.curvature.resize(m);
  ClampCounter clamps{0};
  for (int i = 0; i < m; ++i) {
    const double offset = lik.offset.size() > 0 ? lik.offset(i) : 0.0;
    const PredictorDerivatives pd =
        predictor_derivs(lik.y(i), lik.family, eta(i), hyper, offset, &clamps);
    ev.loglik += pd.loglik;
    ev.d1(i) = pd.d1;
    if (pd.d2 > 0.0) {
      ev.curvature(i) = 0.0;
      ++ev.curvature_clamps;
    } else {
      ev.curvature(i) = -pd.d2;
    }
  }
  ev.clamps = clamps.load();
  return ev;
}

std::string format_trace(const std::vector<NewtonIter>& trace) {
  std::ostringstream os;
  for (const auto& it : trace)
    os << "iter=" << it.iter << " obj=" << it.objective
       << " grad=" << it.grad_norm << " step=" << it.step_scale << "\n";
  return os.str();
}

// Marginal standard deviations of N(mode, P^-1) conditioned on E x = 0.
Vec constrained_sd(const Eigen::LLT<Mat>& llt, const Mat& constraints) {
  const Mat sigma = llt.solve(Mat::Identity(llt.rows(), llt.rows()));
  Vec var = sigma.diagonal();
  if (constraints.rows() > 0) {
    const Mat x = sigma * constraints.transpose();        // n x k
    const Mat m = constraints * x;                        // k x k
    const Mat u = x * m.llt().matrixL().solve(
                          Mat::Identity(m.rows(), m.rows())).transpose();
    var -= u.array().square().rowwise().sum().matrix();
  }
  return var.cwiseMax(0.0).cwiseSqrt();
}

}  // namespace

FamilyHyper LikelihoodSpec::hyper_at(const Vec& theta) const {
  FamilyHyper h;
  h.gamma_shape =
      shape_theta >= 0 ? std::exp(theta(shape_theta)) : fixed_shape;
  h.gp_xi = xi_theta >= 0 ? std::exp(theta(xi_theta)) : fixed_xi;
  h.gp_q = q;
  h.gaussian_precision = gaussian_precision;
  return h;
}

GaussianApprox newton_mode(const LatentGaussianModel& model, const Vec& theta,
                           const Vec& init, const EngineOptions& opts) {
  const int n = model.dim();
  const SpMat& a = model.structure.obs_matrix;
  const Mat q = model.structure.assemble_precision(theta);
  const FamilyHyper hyper = model.likelihood.hyper_at(theta);

  GaussianApprox out;
  Vec x = init.size() == n ? init : Vec::Zero(n);

  LikelihoodEval ev = eval_likelihood(model, hyper, a * x);
  double obj = -0.5 * x.dot(q * x) + ev.loglik;
  out.clamp_count += ev.clamps;
  out.curvature_clamps += ev.curvature_clamps;

  Eigen::LLT<Mat> llt;
  bool converged = false;
  for (int iter = 0; iter < opts.newton_max_iter; ++iter) {
    const Vec grad = -(q * x) + a.transpose() * ev.d1;
    if (!grad.allFinite())
      throw ConvergenceError("newton_mode: non-finite gradient",
                             format_trace(out.trace));
    const double grad_norm = grad.lpNorm<Eigen::Infinity>();
    if (grad_norm < opts.newton_tol) {
      converged = true;
      break;
    }
    Mat p = q;
    p += Mat(a.transpose() * ev.curvature.asDiagonal() * a);
    llt.compute(p);
    if (llt.info() != Eigen::Success)
      throw ConvergenceError("newton_mode: precision factorization failed",
                             format_trace(out.trace));
    const Vec delta = llt.solve(grad);

    double step = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 50; ++halving) {
      const Vec x_new = x + step * delta;
      LikelihoodEval ev_new = eval_likelihood(model, hyper, a * x_new);
      const double obj_new = -0.5 * x_new.dot(q * x_new) + ev_new.loglik;
      out.clamp_count += ev_new.clamps;
      out.curvature_clamps += ev_new.curvature_clamps;
      if (std::isfinite(obj_new) &&
          obj_new >= obj - 1e-12 * (1.0 + std::abs(obj))) {
        x = x_new;
        ev = std::move(ev_new);
        obj = obj_new;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++out.iterations;
    out.trace.push_back({out.iterations, obj, grad_norm, step});
    if (!accepted)
      throw ConvergenceError(
          "newton_mode: no ascent step found (objective not log-concave?)",
          format_trace(out.trace));
  }
  if (!converged)
    throw ConvergenceError("newton_mode: iteration cap exceeded",
                           format_trace(out.trace));

  out.mode_unconstrained = x;
  Mat p = q;
  p += Mat(a.transpose() * ev.curvature.asDiagonal() * a);
  out.precision = p;
  llt.compute(p);
  if (llt.info() != Eigen::Success)
    throw ConvergenceError("newton_mode: final factorization failed",
                           format_trace(out.trace));
  double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();

  const Mat& e = model.structure.constraints;
  if (e.rows() > 0) {
    // conditioning by kriging on E x = 0
    const Mat ext = llt.solve(e.transpose());  // P^-1 E'
    const Mat m = e * ext;                     // E P^-1 E'
    Eigen::LLT<Mat> llt_m(m);
    if (llt_m.info() != Eigen::Success)
      throw ConvergenceError("newton_mode: constraint system singular");
    out.mode = x - ext * llt_m.solve(e * x);
    logdet += 2.0 * llt_m.matrixLLT().diagonal().array().log().sum();
  } else {
    out.mode = x;
  }
  out.logdet_constrained = logdet;

  const LikelihoodEval ev_mode =
      e.rows() > 0 ? eval_likelihood(model, hyper, a * out.mode) : ev;
  out.loglik = ev_mode.loglik;
  out.quad = out.mode.dot(q * out.mode);
  return out;
}

double log_post_hyper(const LatentGaussianModel& model, const Vec& theta,
                      const EngineOptions& opts, GaussianApprox* approx_out,
                      const Vec* init) {
  double lp = 0.0;
  for (int j = 0; j < model.n_theta(); ++j)
    lp += model.hyper[j].log_prior(theta(j));
  if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
  GaussianApprox approx =
      newton_mode(model, theta, init ? *init : Vec(), opts);
  lp += 0.5 * model.structure.logdet_prior(theta);
  lp += -0.5 * approx.quad + approx.loglik;
  lp -= 0.5 * approx.logdet_constrained;
  if (approx_out) *approx_out = std::move(approx);
  return lp;
}

namespace {

using ZKey = std::array<int, 4>;

ZKey key_of(const Eigen::VectorXi& z) {
  ZKey k{0, 0, 0, 0};
  for (int i = 0; i < z.size() && i < 4; ++i) k[i] = z(i);
  return k;
}

struct PointEval {
  double log_post;
  Vec mean;
  Vec sd;
  std::uint64_t clamps;
  int curvature_clamps;
  int iterations;
  bool ok;
};

PointEval eval_grid_point(const LatentGaussianModel& model, const Vec& theta,
                          const EngineOptions& opts, const Vec& init) {
  PointEval pe;
  pe.log_post = -std::numeric_limits<double>::infinity();
  pe.clamps = 0;
  pe.curvature_clamps = 0;
  pe.iterations = 0;
  pe.ok = false;
  try {
    GaussianApprox approx;
    const double lp = log_post_hyper(model, theta, opts, &approx, &init);
    if (!std::isfinite(lp)) return pe;
    Eigen::LLT<Mat> llt(approx.precision);
    pe.log_post = lp;
    pe.mean = approx.mode;
    pe.sd = constrained_sd(llt, model.structure.constraints);
    pe.clamps = approx.clamp_count;
    pe.curvature_clamps = approx.curvature_clamps;
    pe.iterations = approx.iterations;
    pe.ok = true;
  } catch (const ConvergenceError&) {
  } catch (const std::domain_error&) {
  }
  return pe;
}

}  // namespace

HyperGrid explore_grid(const LatentGaussianModel& model,
                       const EngineOptions& opts) {
  const int d = model.n_theta();
  HyperGrid grid;

  if (d == 0) {
    const Vec theta(0);
    const PointEval pe = eval_grid_point(model, theta, opts, Vec());
    if (!pe.ok)
      throw ConvergenceError("explore_grid: fit failed with all "
                             "hyperparameters fixed");
    GridPoint pt;
    pt.theta = theta;
    pt.z = Eigen::VectorXi::Zero(0);
    pt.log_post = pe.log_post;
    pt.weight = 1.0;
    pt.mean = pe.mean;
    pt.sd = pe.sd;
    grid.points.push_back(std::move(pt));
    grid.theta_mode = theta;
    grid.hessian = Mat(0, 0);
    grid.log_post_max = pe.log_post;
    grid.clamp_count = pe.clamps;
    grid.curvature_clamps = pe.curvature_clamps;
    grid.newton_iter_max = pe.iterations;
    return grid;
  }

  // Warm-started objective for the mode search; out-of-range or failed
  // evaluations are treated as -inf so the simplex backs away.
  Vec warm;
  auto lp_fn = [&](const Vec& theta) -> double {
    for (int j = 0; j < d; ++j)
      if (!(std::abs(theta(j)) <= 35.0))
        return -std::numeric_limits<double>::infinity();
    try {
      GaussianApprox approx;
      const double lp = log_post_hyper(model, theta, opts, &approx,
                                       warm.size() ? &warm : nullptr);
      if (std::isfinite(lp)) warm = approx.mode_unconstrained;
      return lp;
    } catch (const ConvergenceError&) {
      return -std::numeric_limits<double>::infinity();
    } catch (const std::domain_error&) {
      return -std::numeric_limits<double>::infinity();
    }
  };

  Vec theta0(d);
  for (int j = 0; j < d; ++j) theta0(j) = model.hyper[j].init;
  const NelderMeadResult nm = nelder_mead(
      [&](const Vec& t) { return -lp_fn(t); }, theta0, 0.5, opts.nm_tol,
      opts.nm_max_iter);
  grid.theta_mode = nm.x;

  grid.hessian =
      numeric_hessian([&](const Vec& t) { return lp_fn(t); }, grid.theta_mode,
                      opts.hessian_step);

  // Standardize: theta(z) = mode + step * T z with T from the (négated,
  // eigenvalue-floored) Hessian.
  Eigen::SelfAdjointEigenSolver<Mat> es(-grid.hessian);
  if (es.info() != Eigen::Success)
    throw ConvergenceError("explore_grid: Hessian eigendecomposition failed");
  const Vec lam = es.eigenvalues().cwiseMax(1e-8);
  const Mat t_std = es.eigenvectors() * lam.cwiseInverse().cwiseSqrt().asDiagonal();

  const Vec center_init = warm;
  auto theta_of = [&](const Eigen::VectorXi& z) {
    return Vec(grid.theta_mode + opts.grid_step * (t_std * z.cast<double>()));
  };

  std::map<ZKey, int> index;
  std::vector<GridPoint> pts;
  std::vector<PointEval> evals;

  auto add_points = [&](const std::vector<Eigen::VectorXi>& zs) {
    const int base = static_cast<int>(pts.size());
    if (base + static_cast<int>(zs.size()) > opts.max_grid_points)
      throw ConvergenceError("explore_grid: grid-size cap exceeded");
    pts.resize(base + zs.size());
    evals.resize(base + zs.size());
    parallel_for(
        static_cast<int>(zs.size()),
        [&](int i) {
          GridPoint pt;
          pt.z = zs[i];
          pt.theta = theta_of(zs[i]);
          evals[base + i] = eval_grid_point(model, pt.theta, opts, center_init);
          pts[base + i] = std::move(pt);
        },
        opts.threads);
    for (int i = base; i < static_cast<int>(pts.size()); ++i)
      index.emplace(key_of(pts[i].z), i);
  };

  add_points({Eigen::VectorXi::Zero(d)});
  if (!evals[0].ok)
    throw ConvergenceError("explore_grid: fit failed at the hyper mode");

  Eigen::VectorXi lo = Eigen::VectorXi::Zero(d);
  Eigen::VectorXi hi = Eigen::VectorXi::Zero(d);

  auto slab = [&](int axis, int level) {
    std::vector<Eigen::VectorXi> zs;
    Eigen::VectorXi z = lo;
    z(axis) = level;
    while (true) {
      zs.push_back(z);
      int j = 0;
      for (; j < d; ++j) {
        if (j == axis) continue;
        if (z(j) < hi(j)) {
          ++z(j);
          for (int k = 0; k < j; ++k)
            if (k != axis) z(k) = lo(k);
          break;
        }
      }
      if (j == d) break;
    }
    return zs;
  };

  auto slab_max = [&](int axis, int level) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& z : slab(axis, level)) {
      auto it = index.find(key_of(z));
      if (it != index.end()) best = std::max(best, evals[it->second].log_post);
    }
    return best;
  };

  double lp_max = evals[0].log_post;
  bool expanded = true;
  while (expanded) {
    expanded = false;
    for (int axis = 0; axis < d; ++axis) {
      for (int side = 0; side < 2; ++side) {
        const int bound = side == 0 ? lo(axis) : hi(axis);
        if (slab_max(axis, bound) > lp_max - opts.edge_drop) {
          const int level = side == 0 ? bound - 1 : bound + 1;
          add_points(slab(axis, level));
          if (side == 0)
            lo(axis) = level;
          else
            hi(axis) = level;
          for (const auto& ev : evals) lp_max = std::max(lp_max, ev.log_post);
          expanded = true;
        }
      }
    }
  }

  // Deterministic ordering, then weights.
  std::vector<int> order(pts.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return key_of(pts[a].z) < key_of(pts[b].z);
  });

  double total = 0.0;
  for (int idx : order) {
    if (!evals[idx].ok) continue;
    total += std::exp(evals[idx].log_post - lp_max);
  }
  grid.log_post_max = lp_max;
  for (int idx : order) {
    const PointEval& pe = evals[idx];
    if (!pe.ok) continue;
    GridPoint pt = std::move(pts[idx]);
    pt.log_post = pe.log_post;
    pt.weight = std::exp(pe.log_post - lp_max) / total;
    pt.mean = pe.mean;
    pt.sd = pe.sd;
    grid.clamp_count += pe.clamps;
    grid.curvature_clamps += pe.curvature_clamps;
    grid.newton_iter_max = std::max(grid.newton_iter_max, pe.iterations);
    grid.points.push_back(std::move(pt));
  }

  for (const auto& pt : grid.points) {
    bool boundary = false;
    for (int axis = 0; axis < d; ++axis)
      if (pt.z(axis) == lo(axis) || pt.z(axis) == hi(axis)) boundary = true;
    if (boundary) grid.edge_mass += pt.weight;
  }
  return grid;
}

namespace {

std::vector<std::string> latent_names(const ModelStructure& s) {
  std::vector<std::string> names;
  for (const auto& b : s.blocks) {
    const int dim = static_cast<int>(b.unit.rows());
    if (dim == 1) {
      names.push_back(b.name);
    } else {
      for (int i = 0; i < dim; ++i)
        names.push_back(b.name + "[" + std::to_string(i) + "]");
    }
  }
  return names;
}

// Quantile of the Gaussian mixture sum_k w_k N(m_k, sd_k^2) by bisection.
double mixture_quantile(const HyperGrid& grid, int comp, double p) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& pt : grid.points) {
    lo = std::min(lo, pt.mean(comp) - 12.0 * pt.sd(comp) - 1e-12);
    hi = std::max(hi, pt.mean(comp) + 12.0 * pt.sd(comp) + 1e-12);
  }
  auto cdf = [&](double x) {
    double f = 0.0;
    for (const auto& pt : grid.points) {
      const double sd = pt.sd(comp);
      f += pt.weight * (sd > 0.0 ? normal_cdf((x - pt.mean(comp)) / sd)
                                 : (x >= pt.mean(comp) ? 1.0 : 0.0));
    }
    return f;
  };
  for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

PosteriorSummary latent_marginals(const LatentGaussianModel& model,
                                  const HyperGrid& grid) {
  if (grid.points.empty())
    throw std::invalid_argument("latent_marginals: empty grid");
  const int n = model.dim();
  PosteriorSummary s;
  s.names = latent_names(model.structure);
  s.mean = Vec::Zero(n);
  s.sd = Vec::Zero(n);
  s.lower = Vec::Zero(n);
  s.upper = Vec::Zero(n);

  Vec second = Vec::Zero(n);
  for (const auto& pt : grid.points) {
    s.mean += pt.weight * pt.mean;
    second += pt.weight *
              (pt.sd.array().square() + pt.mean.array().square()).matrix();
  }
  s.sd = (second.array() - s.mean.array().square()).max(0.0).sqrt();

  for (int i = 0; i < n; ++i) {
    s.lower(i) = mixture_quantile(grid, i, 0.025);
    s.upper(i) = mixture_quantile(grid, i, 0.975);
  }
  return s;
}

namespace {

// Interpolated quantile of a weighted sample (midpoint-CDF convention).
double weighted_quantile(const std::vector<std::pair<double, double>>& atoms,
                         double p) {
  double cum = 0.0;
  std::vector<double> cdf(atoms.size());
  for (size_t i = 0; i < atoms.size(); ++i) {
    cdf[i] = cum + 0.5 * atoms[i].second;
    cum += atoms[i].second;
  }
  if (p <= cdf.front()) return atoms.front().first;
  if (p >= cdf.back()) return atoms.back().first;
  for (size_t i = 1; i < atoms.size(); ++i) {
    if (p <= cdf[i]) {
      const double t = (p - cdf[i - 1]) / (cdf[i] - cdf[i - 1]);
      return atoms[i - 1].first +
             t * (atoms[i].first - atoms[i - 1].first);
    }
  }
  return atoms.back().first;
}

}  // namespace

PosteriorSummary hyper_marginals(const LatentGaussianModel& model,
                                 const HyperGrid& grid) {
  const int d = model.n_theta();
  PosteriorSummary s;
  s.mean = Vec::Zero(d);
  s.sd = Vec::Zero(d);
  s.lower = Vec::Zero(d);
  s.upper = Vec::Zero(d);
  for (int j = 0; j < d; ++j) {
    s.names.push_back(model.hyper[j].name);
    // weighted atoms on the transformed axis
    std::map<double, double> acc;
    double mean = 0.0, second = 0.0;
    for (const auto& pt : grid.points) {
      const double nat = model.hyper[j].natural(pt.theta(j));
      mean += pt.weight * nat;
      second += pt.weight * nat * nat;
      acc[pt.theta(j)] += pt.weight;
    }
    s.mean(j) = mean;
    s.sd(j) = std::sqrt(std::max(second - mean * mean, 0.0));
    std::vector<std::pair<double, double>> atoms(acc.begin(), acc.end());
    const double t_lo = weighted_quantile(atoms, 0.025);
    const double t_hi = weighted_quantile(atoms, 0.975);
    s.lower(j) = model.hyper[j].natural(t_lo);
    s.upper(j) = model.hyper[j].natural(t_hi);
  }
  return s;
}

LaplaceFit fit_latent_gaussian(const LatentGaussianModel& model,
                               const EngineOptions& opts) {
  LaplaceFit fit;
  fit.grid = explore_grid(model, opts);
  fit.latent = latent_marginals(model, fit.grid);
  fit.hyper = hyper_marginals(model, fit.grid);
  fit.diag.grid_size = static_cast<int>(fit.grid.points.size());
  fit.diag.edge_mass = fit.grid.edge_mass;
  fit.diag.newton_iter_max = fit.grid.newton_iter_max;
  fit.diag.clamp_count = fit.grid.clamp_count;
  fit.diag.curvature_clamps = fit.grid.curvature_clamps;
  fit.diag.theta_mode = fit.grid.theta_mode;
  return fit;
}

}  // namespace tailreg
