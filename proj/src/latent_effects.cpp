#include "tailreg/latent_effects.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace tailreg {

SiteSet::SiteSet(std::vector<Site> s) : sites(std::move(s)) {
  std::set<std::string> seen;
  for (const auto& site : sites) {
    if (!seen.insert(site.id).second)
      throw DataError("SiteSet: duplicate station id '" + site.id + "'");
    if (!std::isfinite(site.x_km) || !std::isfinite(site.y_km))
      throw DataError("SiteSet: non-finite coordinates for station '" +
                      site.id + "'");
  }
}

int SiteSet::index_of(const std::string& id) const {
  for (int i = 0; i < size(); ++i)
    if (sites[i].id == id) return i;
  return -1;
}

Mat SiteSet::distance_matrix() const {
  const int n = size();
  Mat d = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = std::hypot(sites[i].x_km - sites[j].x_km,
                                     sites[i].y_km - sites[j].y_km);
    }
  }
  return d;
}

double matern_correlation(double h_km, double psi_km) {
  if (h_km < 0.0) throw std::domain_error("matern_correlation: h must be >= 0");
  if (psi_km <= 0.0)
    throw std::domain_error("matern_correlation: psi must be > 0");
  const double z = std::sqrt(2.0) * h_km / psi_km;
  if (z == 0.0) return 1.0;
  if (z > 700.0) return 0.0;  // underflow region of z K_1(z)
  return z * std::cyl_bessel_k(1.0, z);
}

Mat build_spatial_precision(const MaternSpec& spec, const SiteSet& sites) {
  const int n = sites.size();
  if (n == 0) throw DataError("build_spatial_precision: empty site set");
  const Mat h = sites.distance_matrix();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (h(i, j) < 1e-9)
        throw DataError("build_spatial_precision: stations '" +
                        sites.sites[i].id + "' and '" + sites.sites[j].id +
                        "' coincide");
  Mat cov(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      cov(i, j) = matern_correlation(h(i, j), spec.psi_km) / spec.tau_s;
  cov.diagonal().array() += 1e-10 / spec.tau_s;
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success)
    throw DataError(
        "build_spatial_precision: covariance not positive-definite "
        "(duplicate or near-duplicate sites?)");
  const Mat prec = llt.solve(Mat::Identity(n, n));
  return 0.5 * (prec + prec.transpose());
}

RW2Precision build_rw2_precision(const CyclicRW2Spec& spec) {
  const int n = spec.n_weeks;
  if (n < 5) throw std::domain_error("build_rw2_precision: need >= 5 weeks");
  Mat q = Mat::Zero(n, n);
  // x' Q x = tau_t * sum of squared cyclic second differences
  for (int w = 0; w < n; ++w) {
    const int prev = (w + n - 1) % n;
    const int next = (w + 1) % n;
    // row of the difference operator: (1, -2, 1) at (prev, w, next)
    const int idx[3] = {prev, w, next};
    const double coef[3] = {1.0, -2.0, 1.0};
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        q(idx[a], idx[b]) += spec.tau_t * coef[a] * coef[b];
  }
  return {q, Vec::Ones(n)};
}

int week_of_day(const Date& date) {
  const int doy = day_of_year(date);
  return std::min((doy + 6) / 7, 52);
}

int ModelStructure::dim() const {
  int n = 0;
  for (const auto& b : blocks) n += static_cast<int>(b.unit.rows());
  return n;
}

Mat ModelStructure::assemble_precision(const Vec& theta) const {
  const int n = dim();
  Mat q = Mat::Zero(n, n);
  int at = 0;
  for (const auto& b : blocks) {
    const int d = static_cast<int>(b.unit.rows());
    const double scale =
        b.scale_theta >= 0 ? std::exp(theta(b.scale_theta)) : 1.0;
    q.block(at, at, d, d) = scale * b.unit;
    at += d;
  }
  return q;
}

double ModelStructure::logdet_prior(const Vec& theta) const {
  double ld = 0.0;
  for (const auto& b : blocks) {
    const int d = static_cast<int>(b.unit.rows());
    const double log_scale = b.scale_theta >= 0 ? theta(b.scale_theta) : 0.0;
    ld += (d - b.rank_deficiency) * log_scale + b.logdet_unit;
  }
  return ld;
}

ModelStructure assemble_model(const MaternSpec& matern,
                              const CyclicRW2Spec& rw2, const SiteSet& sites,
                              const std::vector<std::pair<int, int>>& obs,
                              const AssemblyOptions& opts) {
  const int n_sites = sites.size();
  const int n_weeks = rw2.n_weeks;
  const int dim = 1 + n_sites + n_weeks;

  ModelStructure m;

  PrecisionBlock intercept;
  intercept.name = "intercept";
  intercept.unit = Mat::Constant(1, 1, 1.0 / opts.intercept_variance);
  intercept.logdet_unit = -std::log(opts.intercept_variance);
  intercept.rank_deficiency = 0;
  m.blocks.push_back(std::move(intercept));

  PrecisionBlock spatial;
  spatial.name = "spatial";
  // precision is linear in tau_s, so the unit block is built at tau_s = 1
  spatial.unit =
      build_spatial_precision(MaternSpec{matern.psi_km, 1.0, matern.nu}, sites);
  {
    Eigen::LLT<Mat> llt(spatial.unit);
    spatial.logdet_unit =
        2.0 * llt.matrixLLT().diagonal().array().log().sum();
  }
  spatial.rank_deficiency = 0;
  spatial.scale_theta = opts.spatial_theta;
  if (opts.spatial_theta < 0) {
    spatial.unit *= matern.tau_s;
    spatial.logdet_unit += n_sites * std::log(matern.tau_s);
  }
  m.blocks.push_back(std::move(spatial));

  PrecisionBlock weekly;
  weekly.name = "weekly";
  const RW2Precision rw2p = build_rw2_precision(CyclicRW2Spec{n_weeks, 1.0});
  weekly.unit = rw2p.Q;
  // nonzero eigenvalues of the cyclic structure are 16 sin^4(pi j / n);
  // their log-product reduces to 4 log n
  weekly.logdet_unit = 4.0 * std::log(static_cast<double>(n_weeks));
  weekly.rank_deficiency = 1;
  weekly.scale_theta = opts.weekly_theta;
  if (opts.weekly_theta < 0) {
    weekly.unit *= rw2.tau_t;
    weekly.logdet_unit += (n_weeks - 1) * std::log(rw2.tau_t);
  }
  m.blocks.push_back(std::move(weekly));

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(3 * obs.size());
  for (int r = 0; r < static_cast<int>(obs.size()); ++r) {
    const auto [site, week] = obs[r];
    if (site < 0 || site >= n_sites)
      throw DataError("assemble_model: unknown site index " +
                      std::to_string(site));
    if (week < 1 || week > n_weeks)
      throw DataError("assemble_model: week out of range " +
                      std::to_string(week));
    trip.emplace_back(r, 0, 1.0);
    trip.emplace_back(r, 1 + site, 1.0);
    trip.emplace_back(r, 1 + n_sites + (week - 1), 1.0);
  }
  m.obs_matrix.resize(static_cast<int>(obs.size()), dim);
  m.obs_matrix.setFromTriplets(trip.begin(), trip.end());

  // sum-to-zero on the weekly block, normalized
  Mat c = Mat::Zero(1, dim);
  c.block(0, 1 + n_sites, 1, n_weeks).setConstant(
      1.0 / std::sqrt(static_cast<double>(n_weeks)));
  m.constraints = c;

  return m;
}

}  // namespace tailreg
