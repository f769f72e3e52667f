#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support/nelder_mead_oracle.hpp"
#include "support/quadrature.hpp"
#include "support/test_models.hpp"

#include "tailreg/laplace.hpp"
#include "tailreg/optim.hpp"
#include "tailreg/pc_priors.hpp"

#include <cmath>
#include <random>

using namespace tailreg;
using testmodels::group_model;
using testmodels::rows_to_groups;
using testmodels::scalar_block;

namespace {

// log N(y; 0, cov) evaluated densely.
double mvn_logpdf_zero(const Vec& y, const Mat& cov) {
  Eigen::LLT<Mat> llt(cov);
  const Vec alpha = llt.solve(y);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * y.size() * std::log(2.0 * kPi) - 0.5 * logdet -
         0.5 * y.dot(alpha);
}

// Orthonormal basis of the null space of the constraint rows.
Mat null_basis(const Mat& e) {
  Eigen::HouseholderQR<Mat> qr(e.transpose());
  const Mat q = qr.householderQ();
  return q.rightCols(q.cols() - e.rows());
}

void check_trace_monotone(const GaussianApprox& approx) {
  for (size_t i = 1; i < approx.trace.size(); ++i)
    CHECK(approx.trace[i].objective >=
          approx.trace[i - 1].objective - 1e-9 *
              (1.0 + std::abs(approx.trace[i - 1].objective)));
}

// Gradient of the joint log density at x, recomputed independently.
Vec joint_gradient(const LatentGaussianModel& m, const Vec& theta,
                   const Vec& x) {
  const Mat q = m.structure.assemble_precision(theta);
  const FamilyHyper hyper = m.likelihood.hyper_at(theta);
  const Vec eta = m.structure.obs_matrix * x;
  Vec d1(eta.size());
  for (int i = 0; i < eta.size(); ++i) {
    const double off =
        m.likelihood.offset.size() > 0 ? m.likelihood.offset(i) : 0.0;
    d1(i) = predictor_derivs(m.likelihood.y(i), m.likelihood.family, eta(i),
                             hyper, off)
                .d1;
  }
  return Vec(-(q * x) + m.structure.obs_matrix.transpose() * d1);
}

}  // namespace

TEST_CASE("newton_mode solves the Gaussian case in one step") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd(0.0, 1.0);
  const int n = 3, m = 20;
  Mat q0 = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) q0(i, i) = 1.0 + i;
  q0(0, 1) = q0(1, 0) = 0.4;

  LatentGaussianModel model;
  PrecisionBlock b;
  b.name = "x";
  b.unit = q0;
  b.logdet_unit = std::log(q0.determinant());
  b.rank_deficiency = 0;
  model.structure.blocks.push_back(b);
  std::vector<int> groups(m);
  for (int i = 0; i < m; ++i) groups[i] = i % n;
  model.structure.obs_matrix = rows_to_groups(groups, n);
  model.likelihood.family = Family::gaussian;
  model.likelihood.gaussian_precision = 2.5;
  Vec y(m);
  for (int i = 0; i < m; ++i) y(i) = nd(rng) + 0.5 * (i % n);
  model.likelihood.y = y;

  const GaussianApprox approx = newton_mode(model, Vec(), Vec());
  const Mat a = Mat(model.structure.obs_matrix);
  const Mat p = q0 + 2.5 * a.transpose() * a;
  const Vec gls = p.llt().solve(2.5 * a.transpose() * y);
  CHECK((approx.mode - gls).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(approx.iterations == 1);
  CHECK(joint_gradient(model, Vec(), approx.mode).lpNorm<Eigen::Infinity>() <
        1e-8);
}

TEST_CASE("newton_mode on a single Bernoulli datum") {
  LatentGaussianModel model;
  model.structure.blocks.push_back(scalar_block("x", 0.01));
  model.structure.obs_matrix = rows_to_groups({0}, 1);
  model.likelihood.family = Family::bernoulli;
  model.likelihood.y = Vec::Ones(1);
  const GaussianApprox approx = newton_mode(model, Vec(), Vec());
  CHECK(approx.mode(0) > 1.0);  // drifts positive under a flat-ish prior
  CHECK(joint_gradient(model, Vec(), approx.mode).lpNorm<Eigen::Infinity>() <
        1e-8);
  check_trace_monotone(approx);
}

TEST_CASE("newton_mode matches a Nelder-Mead oracle on Bernoulli data") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int n = 3, m = 50;
  LatentGaussianModel model;
  for (int g = 0; g < n; ++g)
    model.structure.blocks.push_back(scalar_block("x" + std::to_string(g), 0.7));
  std::vector<int> groups(m);
  Vec y(m);
  const double truth[3] = {0.9, -0.4, 0.2};
  for (int i = 0; i < m; ++i) {
    groups[i] = i % n;
    const double p = 1.0 / (1.0 + std::exp(-truth[groups[i]]));
    y(i) = u01(rng) < p ? 1.0 : 0.0;
  }
  model.structure.obs_matrix = rows_to_groups(groups, n);
  model.likelihood.family = Family::bernoulli;
  model.likelihood.y = y;

  const GaussianApprox approx = newton_mode(model, Vec(), Vec());
  check_trace_monotone(approx);
  CHECK(approx.iterations <= 100);

  auto objective = [&](const Eigen::VectorXd& x) {
    const Mat q = model.structure.assemble_precision(Vec());
    double ll = -0.5 * x.dot(q * x);
    const Vec eta = model.structure.obs_matrix * x;
    for (int i = 0; i < m; ++i)
      ll += predictor_derivs(y(i), Family::bernoulli, eta(i), FamilyHyper{})
                .loglik;
    return ll;
  };
  const Vec oracle_mode =
      oracle::nelder_mead_max(objective, Vec::Zero(n), 0.5, 1e-14, 50000);
  CHECK((approx.mode - oracle_mode).lpNorm<Eigen::Infinity>() < 1e-5);
}

TEST_CASE("log_post_hyper is exact for the conjugate Gaussian model") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> nd(0.0, 1.0);
  const int n = 3, m = 24;
  Mat q0 = Mat::Identity(n, n);
  q0(0, 1) = q0(1, 0) = 0.3;
  q0(1, 2) = q0(2, 1) = -0.2;
  q0(0, 0) = 1.5;

  LatentGaussianModel model;
  PrecisionBlock b;
  b.name = "x";
  b.unit = q0;
  b.logdet_unit = std::log(q0.determinant());
  b.rank_deficiency = 0;
  b.scale_theta = 0;
  model.structure.blocks.push_back(b);
  std::vector<int> groups(m);
  for (int i = 0; i < m; ++i) groups[i] = i % n;
  model.structure.obs_matrix = rows_to_groups(groups, n);
  const double tau_obs = 1.8;
  model.likelihood.family = Family::gaussian;
  model.likelihood.gaussian_precision = tau_obs;
  Vec y(m);
  for (int i = 0; i < m; ++i) y(i) = nd(rng) + 0.2 * (i % n);
  model.likelihood.y = y;
  const PrecisionPrior prior{2.0, 1.0};
  HyperParam tau;
  tau.name = "tau";
  tau.log_prior = [prior](double t) { return prior.logpdf_log_tau(t); };
  model.hyper.push_back(tau);

  const Mat a = Mat(model.structure.obs_matrix);
  for (double t : {-1.0, -0.3, 0.0, 0.4, 1.2}) {
    Vec theta(1);
    theta << t;
    const double lp = log_post_hyper(model, theta);
    const Mat cov = Mat::Identity(m, m) / tau_obs +
                    a * (std::exp(t) * q0).inverse() * a.transpose();
    const double closed = prior.logpdf_log_tau(t) + mvn_logpdf_zero(y, cov);
    CHECK(lp == doctest::Approx(closed).epsilon(1e-10));
  }
}

TEST_CASE("constrained conjugate model matches the subspace closed form") {
  // intercept + 2-site spatial + 52-week cyclic RW2 with sum-to-zero
  std::vector<Site> two = {{"A", 0.0, 0.0}, {"B", 35.0, 0.0}};
  const SiteSet sites(two);
  std::vector<std::pair<int, int>> obs;
  std::mt19937_64 rng(41);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int rep = 0; rep < 3; ++rep)
    for (int s = 0; s < 2; ++s)
      for (int w = 1; w <= 52; ++w) obs.emplace_back(s, w);
  LatentGaussianModel model;
  model.structure = assemble_model(MaternSpec{50.0, 2.0},
                                   CyclicRW2Spec{52, 40.0}, sites, obs);
  const int m = static_cast<int>(obs.size());
  const double tau_obs = 4.0;
  model.likelihood.family = Family::gaussian;
  model.likelihood.gaussian_precision = tau_obs;
  Vec y(m);
  for (int i = 0; i < m; ++i)
    y(i) = 0.7 + 0.4 * std::sin(2.0 * kPi * obs[i].second / 52.0) +
           0.2 * obs[i].first + 0.5 * nd(rng);
  model.likelihood.y = y;

  const LaplaceFit fit = fit_latent_gaussian(model);
  REQUIRE(fit.grid.points.size() == 1);

  // closed form on the constraint-orthogonal subspace
  const Mat w_basis = null_basis(model.structure.constraints);
  const Mat a = Mat(model.structure.obs_matrix);
  const Mat q = model.structure.assemble_precision(Vec());
  const Mat qz = w_basis.transpose() * q * w_basis;
  const Mat az = a * w_basis;
  const Mat pz = qz + tau_obs * az.transpose() * az;
  const Eigen::LLT<Mat> llt(pz);
  const Vec mean_z = llt.solve(tau_obs * az.transpose() * y);
  const Mat cov_z = llt.solve(Mat::Identity(pz.rows(), pz.rows()));
  const Vec mean = w_basis * mean_z;
  const Vec sd = (w_basis * cov_z * w_basis.transpose())
                     .diagonal()
                     .cwiseMax(0.0)
                     .cwiseSqrt();

  CHECK((fit.latent.mean - mean).lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK((fit.latent.sd - sd).lpNorm<Eigen::Infinity>() < 1e-8);

  // weekly effect honors the constraint
  CHECK(std::abs(fit.latent.mean.tail(52).sum()) < 1e-9);

  // Gaussian quantiles from the single-component mixture
  for (int i = 0; i < 55; i += 11) {
    CHECK(fit.latent.lower(i) ==
          doctest::Approx(mean(i) - 1.959963984540054 * sd(i)).epsilon(1e-7));
    CHECK(fit.latent.upper(i) ==
          doctest::Approx(mean(i) + 1.959963984540054 * sd(i)).epsilon(1e-7));
  }

  // and the evidence matches the subspace marginal likelihood with one
  // free hyperparameter
  LatentGaussianModel free_model = model;
  free_model.structure.blocks[1].scale_theta = 0;
  {
    Eigen::LLT<Mat> unit_llt(free_model.structure.blocks[1].unit);
    free_model.structure.blocks[1].logdet_unit =
        2.0 * unit_llt.matrixLLT().diagonal().array().log().sum();
  }
  const PrecisionPrior prior{2.0, 1.0};
  HyperParam tau;
  tau.name = "tau_s";
  tau.log_prior = [prior](double t) { return prior.logpdf_log_tau(t); };
  free_model.hyper.push_back(tau);
  for (double t : {-0.5, 0.0, 0.8}) {
    Vec theta(1);
    theta << t;
    const double lp = log_post_hyper(free_model, theta);
    const Mat qz_t =
        w_basis.transpose() *
        free_model.structure.assemble_precision(theta) * w_basis;
    const Mat cov = Mat::Identity(m, m) / tau_obs +
                    az * qz_t.inverse() * az.transpose();
    const double closed = prior.logpdf_log_tau(t) + mvn_logpdf_zero(y, cov);
    CHECK(lp == doctest::Approx(closed).epsilon(1e-9));
  }
}

TEST_CASE("explore_grid collapses to a point mass with fixed hypers") {
  LatentGaussianModel model = group_model(Family::bernoulli,
                                          Vec::Ones(10), 1, false, 1.0);
  const HyperGrid grid = explore_grid(model);
  REQUIRE(grid.points.size() == 1);
  CHECK(grid.points[0].weight == 1.0);
  CHECK(grid.points[0].theta.size() == 0);
}

TEST_CASE("explore_grid weights are unimodal for a unimodal posterior") {
  std::mt19937_64 rng(53);
  std::normal_distribution<double> nd(0.0, 0.8);
  Vec y(40);
  for (int i = 0; i < 40; ++i) y(i) = nd(rng);
  LatentGaussianModel model = group_model(Family::gaussian, y, 4, true);
  const HyperGrid grid = explore_grid(model);
  REQUIRE(grid.points.size() >= 5);
  // points come out sorted by lattice coordinate on one axis; weights rise
  // to the maximum and fall after it (to within rounding noise)
  size_t imax = 0;
  for (size_t i = 1; i < grid.points.size(); ++i) {
    CHECK(grid.points[i].z(0) == grid.points[i - 1].z(0) + 1);
    if (grid.points[i].weight > grid.points[imax].weight) imax = i;
  }
  for (size_t i = 0; i + 1 < grid.points.size(); ++i) {
    if (i < imax)
      CHECK(grid.points[i].weight <= grid.points[i + 1].weight + 1e-12);
    else
      CHECK(grid.points[i + 1].weight <= grid.points[i].weight + 1e-12);
  }
  double total = 0.0;
  for (const auto& pt : grid.points) total += pt.weight;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(grid.edge_mass < 0.05);
}

TEST_CASE("grid posterior of the tail index matches dense quadrature") {
  // one latent intercept, free log(xi); oracle integrates the latent by
  // adaptive quadrature on a fine log(xi) grid
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int n = 2000;
  Vec y(n);
  const GPQuantileParam truth{1.0, 0.5, 0.34};
  for (int i = 0; i < n; ++i) {
    double u = u01(rng);
    while (u <= 0.0 || u >= 1.0) u = u01(rng);
    y(i) = gp_quantile(u, truth);
  }
  LatentGaussianModel model;
  model.structure.blocks.push_back(scalar_block("b", 0.5));
  model.structure.obs_matrix = rows_to_groups(std::vector<int>(n, 0), 1);
  model.likelihood.family = Family::gp;
  model.likelihood.y = y;
  model.likelihood.xi_theta = 0;
  model.likelihood.q = 0.5;
  HyperParam xi;
  xi.name = "xi";
  xi.log_prior = [](double t) {
    return log_prior_log_xi(t, PCPriorForm::exponential, 15.0);
  };
  xi.init = std::log(0.1);
  model.hyper.push_back(xi);

  const LaplaceFit fit = fit_latent_gaussian(model);
  const double engine_mean = fit.hyper.mean(0);

  // oracle: fine grid over log xi
  const int grid_n = 150;
  const double lo = std::log(0.2), hi = std::log(0.6);
  double z = 0.0, zx = 0.0, max_lev = -1e300;
  std::vector<double> lev(grid_n);
  for (int i = 0; i < grid_n; ++i) {
    Vec theta(1);
    theta << lo + (hi - lo) * i / (grid_n - 1.0);
    lev[i] = testmodels::group_model_log_evidence(model, theta);
    max_lev = std::max(max_lev, lev[i]);
  }
  for (int i = 0; i < grid_n; ++i) {
    const double t = lo + (hi - lo) * i / (grid_n - 1.0);
    const double w = std::exp(lev[i] - max_lev);
    z += w;
    zx += w * std::exp(t);
  }
  const double oracle_mean = zx / z;
  CHECK(std::abs(engine_mean - oracle_mean) / oracle_mean < 0.01);
}

TEST_CASE("constant offset shifts the mode but not the theta ranking") {
  std::mt19937_64 rng(71);
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec y(30);
  for (int i = 0; i < 30; ++i) y(i) = 1.5 + nd(rng);
  LatentGaussianModel model = group_model(Family::gaussian, y, 3, true);
  LatentGaussianModel shifted = model;
  shifted.likelihood.offset = Vec::Constant(30, 5.0);
  shifted.likelihood.y = y.array() + 5.0;

  Vec t1(1), t2(1);
  t1 << 0.2;
  t2 << 0.9;
  const double d_base =
      log_post_hyper(model, t1) - log_post_hyper(model, t2);
  const double d_shift =
      log_post_hyper(shifted, t1) - log_post_hyper(shifted, t2);
  CHECK(d_base == doctest::Approx(d_shift).epsilon(1e-9));

  GaussianApprox a0, a5;
  log_post_hyper(model, t1, EngineOptions{}, &a0);
  log_post_hyper(shifted, t1, EngineOptions{}, &a5);
  CHECK((a5.mode - a0.mode).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("Bernoulli toy: grid posterior and latent means vs quadrature oracle") {
  std::mt19937_64 rng(83);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int groups = 2, n_per = 25;
  Vec y(groups * n_per);
  const double truth[2] = {0.8, -0.6};
  for (int g = 0; g < groups; ++g) {
    const double p = 1.0 / (1.0 + std::exp(-truth[g]));
    for (int i = 0; i < n_per; ++i)
      y(g * n_per + i) = u01(rng) < p ? 1.0 : 0.0;
  }
  LatentGaussianModel model = group_model(Family::bernoulli, y, groups, true);
  const LaplaceFit fit = fit_latent_gaussian(model);

  // total variation of the normalized theta-grid posterior vs the exact one
  double tv = 0.0;
  {
    std::vector<double> exact(fit.grid.points.size());
    double max_lev = -1e300;
    for (size_t i = 0; i < fit.grid.points.size(); ++i) {
      exact[i] = testmodels::group_model_log_evidence(model,
                                                      fit.grid.points[i].theta);
      max_lev = std::max(max_lev, exact[i]);
    }
    double z = 0.0;
    for (double& e : exact) {
      e = std::exp(e - max_lev);
      z += e;
    }
    for (size_t i = 0; i < exact.size(); ++i)
      tv += std::abs(exact[i] / z - fit.grid.points[i].weight);
    tv *= 0.5;
  }
  CHECK(tv < 0.02);

  // posterior means of the latent effects against nested quadrature
  const int theta_n = 200;
  const double lo = fit.grid.theta_mode(0) - 3.0,
               hi = fit.grid.theta_mode(0) + 3.0;
  Vec mean_oracle = Vec::Zero(groups);
  double z = 0.0, max_lev = -1e300;
  std::vector<double> lev(theta_n);
  std::vector<Vec> cond(theta_n);
  for (int i = 0; i < theta_n; ++i) {
    Vec theta(1);
    theta << lo + (hi - lo) * i / (theta_n - 1.0);
    lev[i] = testmodels::group_model_log_evidence(model, theta);
    cond[i] = testmodels::group_model_conditional_means(model, theta);
    max_lev = std::max(max_lev, lev[i]);
  }
  for (int i = 0; i < theta_n; ++i) {
    const double w = std::exp(lev[i] - max_lev);
    z += w;
    mean_oracle += w * cond[i];
  }
  mean_oracle /= z;
  for (int g = 0; g < groups; ++g) {
    CHECK(std::abs(fit.latent.mean(g) - mean_oracle(g)) /
              std::abs(mean_oracle(g)) <
          0.02);
  }
}

TEST_CASE("latent marginals from a single grid point are Gaussian") {
  std::mt19937_64 rng(91);
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec y(12);
  for (int i = 0; i < 12; ++i) y(i) = nd(rng);
  LatentGaussianModel model = group_model(Family::gaussian, y, 2, false, 2.0);
  const LaplaceFit fit = fit_latent_gaussian(model);
  REQUIRE(fit.grid.points.size() == 1);
  const GaussianApprox approx = newton_mode(model, Vec(), Vec());
  CHECK((fit.latent.mean - approx.mode).lpNorm<Eigen::Infinity>() == 0.0);
  const Mat cov = approx.precision.inverse();
  for (int i = 0; i < 2; ++i) {
    CHECK(fit.latent.sd(i) ==
          doctest::Approx(std::sqrt(cov(i, i))).epsilon(1e-10));
    CHECK(fit.latent.upper(i) - fit.latent.mean(i) ==
          doctest::Approx(1.959963984540054 * fit.latent.sd(i)).epsilon(1e-7));
  }
}

TEST_CASE("hyper marginals: separable model factorizes") {
  std::mt19937_64 rng(97);
  std::normal_distribution<double> nd(0.0, 1.2);
  const int n_per = 20;
  Vec y(2 * n_per);
  for (int i = 0; i < 2 * n_per; ++i) y(i) = nd(rng) + (i < n_per ? 0.5 : -0.2);

  // joint model: two groups with separate free precisions
  LatentGaussianModel joint;
  joint.structure.blocks.push_back(scalar_block("x0", 1.0, 0));
  joint.structure.blocks.push_back(scalar_block("x1", 1.0, 1));
  std::vector<int> groups(2 * n_per);
  for (int i = 0; i < 2 * n_per; ++i) groups[i] = i / n_per;
  joint.structure.obs_matrix = rows_to_groups(groups, 2);
  joint.likelihood.family = Family::gaussian;
  joint.likelihood.y = y;
  const PrecisionPrior prior{10.0, 2.0};
  for (int j = 0; j < 2; ++j) {
    HyperParam tau;
    tau.name = "tau" + std::to_string(j);
    tau.log_prior = [prior](double t) { return prior.logpdf_log_tau(t); };
    tau.init = std::log(5.0);
    joint.hyper.push_back(tau);
  }
  const LaplaceFit joint_fit = fit_latent_gaussian(joint);

  // the same two groups fitted alone
  for (int g = 0; g < 2; ++g) {
    LatentGaussianModel solo = group_model(
        Family::gaussian, y.segment(g * n_per, n_per), 1, true);
    const LaplaceFit solo_fit = fit_latent_gaussian(solo);
    CHECK(std::abs(joint_fit.hyper.mean(g) - solo_fit.hyper.mean(0)) <
          2e-3 * solo_fit.hyper.mean(0));
    CHECK(std::abs(joint_fit.hyper.sd(g) - solo_fit.hyper.sd(0)) <
          5e-3 * solo_fit.hyper.sd(0));
  }
}

TEST_CASE("simulation-based calibration of the tail index (mini)") {
  int covered = 0;
  const int reps = 10;
  for (int rep = 0; rep < reps; ++rep) {
    std::mt19937_64 rng(1000 + rep);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const int n = 5000;
    Vec y(n);
    const GPQuantileParam truth{1.0, 0.5, 0.34};
    for (int i = 0; i < n; ++i) {
      double u = u01(rng);
      while (u <= 0.0 || u >= 1.0) u = u01(rng);
      y(i) = gp_quantile(u, truth);
    }
    LatentGaussianModel model;
    model.structure.blocks.push_back(scalar_block("b", 1e-3));
    model.structure.obs_matrix = rows_to_groups(std::vector<int>(n, 0), 1);
    model.likelihood.family = Family::gp;
    model.likelihood.y = y;
    model.likelihood.xi_theta = 0;
    model.likelihood.q = 0.5;
    HyperParam xi;
    xi.name = "xi";
    xi.log_prior = [](double t) {
      return log_prior_log_xi(t, PCPriorForm::exponential, 15.0);
    };
    xi.init = std::log(0.1);
    model.hyper.push_back(xi);
    const LaplaceFit fit = fit_latent_gaussian(model);
    if (fit.hyper.lower(0) <= 0.34 && 0.34 <= fit.hyper.upper(0)) ++covered;
  }
  CHECK(covered >= 8);
}

TEST_CASE("fits are deterministic including under threads") {
  std::mt19937_64 rng(113);
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec y(60);
  for (int i = 0; i < 60; ++i) y(i) = nd(rng);
  LatentGaussianModel model = group_model(Family::gaussian, y, 3, true);
  EngineOptions opts;
  opts.threads = 4;
  const LaplaceFit a = fit_latent_gaussian(model, opts);
  const LaplaceFit b = fit_latent_gaussian(model, opts);
  CHECK((a.latent.mean - b.latent.mean).norm() == 0.0);
  CHECK((a.latent.sd - b.latent.sd).norm() == 0.0);
  CHECK((a.hyper.mean - b.hyper.mean).norm() == 0.0);
  CHECK((a.hyper.lower - b.hyper.lower).norm() == 0.0);
  REQUIRE(a.grid.points.size() == b.grid.points.size());
  for (size_t i = 0; i < a.grid.points.size(); ++i)
    CHECK(a.grid.points[i].weight == b.grid.points[i].weight);
}

TEST_CASE("newton non-convergence carries an iteration trace") {
  LatentGaussianModel model = group_model(Family::bernoulli,
                                          Vec::Ones(20), 1, false, 0.5);
  EngineOptions opts;
  opts.newton_max_iter = 1;
  opts.newton_tol = 1e-14;
  try {
    newton_mode(model, Vec(), Vec(), opts);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(std::string(e.what()).find("iteration cap") != std::string::npos);
    CHECK(!e.trace.empty());
    CHECK(e.trace.find("obj=") != std::string::npos);
  }
}
