#include "tailreg/pipeline.hpp"

#include "tailreg/distributions.hpp"
#include "tailreg/pc_priors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

namespace tailreg {

namespace {

constexpr int kWeeks = 52;

MaternSpec matern_spec(const RunConfig& config) {
  return MaternSpec{config.psi_km, 1.0, 1.0};
}

HyperParam precision_hyper(const std::string& name, const RunConfig& config) {
  const PrecisionPrior prior(config.priors.precision_prior_shape,
                             config.priors.precision_prior_inverse_scale);
  HyperParam h;
  h.name = name;
  h.log_prior = [prior](double t) { return prior.logpdf_log_tau(t); };
  h.init = 0.0;
  return h;
}

StageFit make_stage_fit(const std::string& stage, const LaplaceFit& fit,
                        int n_sites, long n_obs) {
  StageFit out;
  out.stage = stage;
  out.latent = fit.latent;
  out.hyper = fit.hyper;
  out.diag = fit.diag;
  out.n_sites = n_sites;
  out.n_weeks = kWeeks;
  out.n_obs = n_obs;
  return out;
}

}  // namespace

std::vector<int> Dataset::years() const {
  std::set<int> ys;
  for (const auto& r : records) ys.insert(r.date.year);
  return std::vector<int>(ys.begin(), ys.end());
}

Dataset make_dataset(SiteSet sites, std::vector<Observation> records) {
  Dataset d;
  d.sites = std::move(sites);
  d.records = std::move(records);
  for (auto& r : d.records) {
    if (r.site < 0 || r.site >= d.sites.size())
      throw DataError("dataset: record references unknown site index " +
                      std::to_string(r.site));
    if (!(r.value >= 0.0) || !std::isfinite(r.value))
      throw DataError("dataset: negative or non-finite value at station " +
                      d.sites.sites[r.site].id);
    r.day_serial = serial_from_date(r.date);
  }
  std::sort(d.records.begin(), d.records.end(),
            [](const Observation& a, const Observation& b) {
              return std::tie(a.site, a.day_serial) <
                     std::tie(b.site, b.day_serial);
            });
  for (size_t i = 1; i < d.records.size(); ++i) {
    if (d.records[i].site == d.records[i - 1].site &&
        d.records[i].day_serial == d.records[i - 1].day_serial)
      throw DataError("dataset: duplicate (station, day) at station " +
                      d.sites.sites[d.records[i].site].id + " " +
                      format_iso_date(d.records[i].date));
  }
  return d;
}

double StageFit::predictor(int site, int week) const {
  return latent.mean(0) + latent.mean(1 + site) +
         latent.mean(1 + n_sites + week - 1);
}

double StageFit::hyper_mean(const std::string& name) const {
  for (int i = 0; i < hyper.size(); ++i)
    if (hyper.names[i] == name) return hyper.mean(i);
  throw std::invalid_argument("StageFit: no hyperparameter named '" + name +
                              "'");
}

StageFit fit_stage1_gamma(const Dataset& data, const RunConfig& config) {
  std::vector<std::pair<int, int>> obs;
  std::vector<double> y;
  for (const auto& r : data.records) {
    if (r.value > 0.0) {
      obs.emplace_back(r.site, week_of_day(r.date));
      y.push_back(r.value);
    }
  }
  if (y.empty())
    throw DataError("stage1: no positive precipitation records");

  AssemblyOptions opts;
  opts.intercept_variance = config.intercept_variance;
  opts.spatial_theta = 1;  // theta = [log k, log tau_s]
  LatentGaussianModel model;
  model.structure = assemble_model(matern_spec(config),
                                   CyclicRW2Spec{kWeeks, config.tau_t()},
                                   data.sites, obs, opts);
  model.likelihood.family = Family::gamma;
  model.likelihood.y = Eigen::Map<Vec>(y.data(), y.size());
  model.likelihood.shape_theta = 0;

  const GammaShapePrior shape_prior{
      config.priors.shape_prior_shape,
      config.priors.shape_prior_shape / config.priors.shape_prior_mean};
  HyperParam shape;
  shape.name = "shape";
  shape.log_prior = [shape_prior](double t) {
    return log_prior_log_shape(t, shape_prior);
  };
  shape.init = 0.0;
  model.hyper.push_back(std::move(shape));
  model.hyper.push_back(precision_hyper("tau_s", config));

  const LaplaceFit fit = fit_latent_gaussian(model, config.engine);
  return make_stage_fit("gamma", fit, data.sites.size(),
                        static_cast<long>(y.size()));
}

ThresholdSurface compute_threshold(const StageFit& stage1, double p_plus) {
  if (stage1.stage != "gamma")
    throw std::invalid_argument("compute_threshold: needs a gamma stage fit");
  if (!(p_plus > 0.0 && p_plus < 1.0))
    throw std::domain_error("compute_threshold: p_plus must be in (0,1)");
  const double k_hat = stage1.hyper_mean("shape");
  ThresholdSurface surf;
  surf.p_plus = p_plus;
  surf.u.resize(stage1.n_sites, kWeeks);
  for (int s = 0; s < stage1.n_sites; ++s) {
    for (int w = 1; w <= kWeeks; ++w) {
      const double mu = std::exp(stage1.predictor(s, w));
      surf.u(s, w - 1) = gamma_quantile(p_plus, GammaMeanShape{mu, k_hat});
    }
  }
  surf.provenance = "stage1-gamma";
  return surf;
}

StageFit fit_stage2_bernoulli(const Dataset& data,
                              const ThresholdSurface& thresholds,
                              const RunConfig& config) {
  if (thresholds.u.rows() != data.sites.size())
    throw DataError("stage2: threshold surface does not cover the site set");
  std::vector<std::pair<int, int>> obs;
  std::vector<double> z;
  obs.reserve(data.records.size());
  z.reserve(data.records.size());
  for (const auto& r : data.records) {
    const int w = week_of_day(r.date);
    obs.emplace_back(r.site, w);
    z.push_back(r.value > thresholds.u(r.site, w - 1) ? 1.0 : 0.0);
  }
  if (z.empty()) throw DataError("stage2: empty dataset");

  AssemblyOptions opts;
  opts.intercept_variance = config.intercept_variance;
  opts.spatial_theta = 0;  // theta = [log tau_s]
  LatentGaussianModel model;
  model.structure = assemble_model(matern_spec(config),
                                   CyclicRW2Spec{kWeeks, config.tau_t()},
                                   data.sites, obs, opts);
  model.likelihood.family = Family::bernoulli;
  model.likelihood.y = Eigen::Map<Vec>(z.data(), z.size());
  model.hyper.push_back(precision_hyper("tau_s", config));

  const LaplaceFit fit = fit_latent_gaussian(model, config.engine);
  return make_stage_fit("bernoulli", fit, data.sites.size(),
                        static_cast<long>(z.size()));
}

StageFit fit_stage3_gp(const Dataset& data, const ThresholdSurface& thresholds,
                       const StageFit& stage1, const RunConfig& config) {
  if (thresholds.u.rows() != data.sites.size())
    throw DataError("stage3: threshold surface does not cover the site set");
  std::vector<std::pair<int, int>> obs;
  std::vector<double> excess;
  std::vector<double> offsets;
  for (const auto& r : data.records) {
    const int w = week_of_day(r.date);
    const double u = thresholds.u(r.site, w - 1);
    if (r.value > u) {
      obs.emplace_back(r.site, w);
      excess.push_back(r.value - u);
      offsets.push_back(stage1.predictor(r.site, w));  // log mu_hat
    }
  }
  const int n_exc = static_cast<int>(excess.size());
  if (n_exc < config.min_exceedances)
    throw DataError("stage3: only " + std::to_string(n_exc) +
                    " exceedances (need >= " +
                    std::to_string(config.min_exceedances) + ")");

  AssemblyOptions opts;
  opts.intercept_variance = config.intercept_variance;
  opts.spatial_theta = 1;  // theta = [log xi, log tau_s]
  LatentGaussianModel model;
  model.structure = assemble_model(matern_spec(config),
                                   CyclicRW2Spec{kWeeks, config.tau_t()},
                                   data.sites, obs, opts);
  model.likelihood.family = Family::gp;
  model.likelihood.y = Eigen::Map<Vec>(excess.data(), excess.size());
  model.likelihood.offset = Eigen::Map<Vec>(offsets.data(), offsets.size());
  model.likelihood.xi_theta = 0;
  model.likelihood.q = config.q;

  HyperParam xi;
  xi.name = "xi";
  const PCPriorForm form = config.priors.xi_prior_form;
  const double rate = config.priors.xi_prior_rate;
  xi.log_prior = [form, rate](double t) {
    return log_prior_log_xi(t, form, rate);
  };
  xi.init = std::log(0.1);
  model.hyper.push_back(std::move(xi));
  model.hyper.push_back(precision_hyper("tau_s", config));

  const LaplaceFit fit = fit_latent_gaussian(model, config.engine);
  StageFit out = make_stage_fit("gp", fit, data.sites.size(), n_exc);
  out.gp_q = config.q;
  out.offset.resize(stage1.n_sites, kWeeks);
  for (int s = 0; s < stage1.n_sites; ++s)
    for (int w = 1; w <= kWeeks; ++w) out.offset(s, w - 1) = stage1.predictor(s, w);
  if (n_exc < config.warn_exceedances)
    out.warnings.push_back("stage3: only " + std::to_string(n_exc) +
                           " exceedances; tail estimates may be unstable");
  return out;
}

double compose_quantile(double alpha, double u, double p_u, double kappa_q,
                        double q, double xi) {
  if (!(alpha > 1.0 - p_u))
    throw std::domain_error("compose_quantile: alpha below threshold level");
  const double log_r = std::log((1.0 - alpha) / p_u);  // r in (0,1)
  const double log_omq = std::log1p(-q);
  if (xi <= kXiZeroBranch) return u + kappa_q * log_r / log_omq;
  return u + kappa_q * std::expm1(-xi * log_r) / std::expm1(-xi * log_omq);
}

QuantilePrediction predict_quantile(
    double alpha, const StageFit& stage2, const StageFit& stage3,
    const ThresholdSurface& thresholds,
    const std::vector<std::pair<int, Date>>& targets) {
  QuantilePrediction pred;
  pred.alpha = alpha;
  const double xi_hat = stage3.hyper_mean("xi");
  pred.daily.reserve(targets.size());

  struct MonthAcc {
    double sum = 0.0;
    int n_days = 0;
    int n_flagged = 0;
  };
  std::map<std::tuple<int, int, int>, MonthAcc> months;

  for (const auto& [site, date] : targets) {
    const int w = week_of_day(date);
    const double p_u =
        1.0 / (1.0 + std::exp(-stage2.predictor(site, w)));
    DailyPrediction d{site, date, std::numeric_limits<double>::quiet_NaN(),
                      false};
    auto& acc = months[{site, date.year, date.month}];
    if (alpha <= 1.0 - p_u) {
      d.below_threshold_flag = true;
      ++acc.n_flagged;
    } else {
      const double u = thresholds.u(site, w - 1);
      const double kappa =
          std::exp(stage3.offset(site, w - 1) + stage3.predictor(site, w));
      d.value = compose_quantile(alpha, u, p_u, kappa, stage3.gp_q, xi_hat);
      acc.sum += d.value;
      ++acc.n_days;
    }
    pred.daily.push_back(d);
  }

  for (const auto& [key, acc] : months) {
    const auto [site, year, month] = key;
    MonthlyPrediction m;
    m.site = site;
    m.year = year;
    m.month = month;
    m.n_days = acc.n_days + acc.n_flagged;
    m.n_flagged = acc.n_flagged;
    m.value = acc.n_days > 0 ? acc.sum / acc.n_days
                             : std::numeric_limits<double>::quiet_NaN();
    pred.monthly.push_back(m);
  }
  return pred;
}

StageFits run_stages(const Dataset& data, const RunConfig& config) {
  StageFits fits;
  try {
    fits.stage1 = fit_stage1_gamma(data, config);
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(std::string("stage1: ") + e.what(), e.trace);
  }
  fits.thresholds = compute_threshold(fits.stage1, config.p_plus);
  try {
    fits.stage2 = fit_stage2_bernoulli(data, fits.thresholds, config);
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(std::string("stage2: ") + e.what(), e.trace);
  }
  try {
    fits.stage3 = fit_stage3_gp(data, fits.thresholds, fits.stage1, config);
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(std::string("stage3: ") + e.what(), e.trace);
  }
  return fits;
}

PipelineResult run_pipeline(const Dataset& data, const RunConfig& config) {
  if (data.records.empty()) throw DataError("run_pipeline: empty dataset");
  StageFits fits = run_stages(data, config);

  int lo = data.records.front().day_serial, hi = lo;
  for (const auto& r : data.records) {
    lo = std::min(lo, r.day_serial);
    hi = std::max(hi, r.day_serial);
  }
  std::vector<std::pair<int, Date>> targets;
  targets.reserve(static_cast<size_t>(data.sites.size()) * (hi - lo + 1));
  for (int s = 0; s < data.sites.size(); ++s)
    for (int d = lo; d <= hi; ++d) targets.emplace_back(s, date_from_serial(d));

  PipelineResult result;
  result.prediction = predict_quantile(config.alpha, fits.stage2, fits.stage3,
                                       fits.thresholds, targets);
  result.stage1 = std::move(fits.stage1);
  result.stage2 = std::move(fits.stage2);
  result.stage3 = std::move(fits.stage3);
  result.thresholds = std::move(fits.thresholds);
  return result;
}

}  // namespace tailreg
