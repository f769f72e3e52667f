#include "tailreg/simulate.hpp"

#include "tailreg/distributions.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace tailreg {

namespace {

constexpr int kWeeks = 52;

double weekly_shape(int week) {  // smooth, sums to zero over the 52 weeks
  return std::sin(2.0 * kPi * (week - 1) / kWeeks);
}

double spatial_shape(double x_km, double y_km, double region_km) {
  return std::sin(2.0 * kPi * x_km / region_km) *
         std::cos(2.0 * kPi * y_km / region_km);
}

}  // namespace

SiteSet simulated_sites(const SimulateSettings& sim, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x5173a11ce5ull);
  std::uniform_real_distribution<double> unif(0.0, sim.region_km);
  std::vector<Site> sites;
  for (int i = 0; i < sim.n_stations; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "S%02d", i + 1);
    sites.push_back({id, unif(rng), unif(rng)});
  }
  return SiteSet(std::move(sites));
}

TruthRecord make_truth(const SiteSet& sites, const RunConfig& config) {
  const SimulateSettings& sim = config.sim;
  const int n = sites.size();
  TruthRecord t;
  t.sites = sites;
  t.k = sim.k;
  t.xi = sim.xi;
  t.q = config.q;
  t.p_plus = config.p_plus;
  t.p_wet = sim.p_wet;
  t.alpha = config.alpha;
  t.mu.resize(n, kWeeks);
  t.u.resize(n, kWeeks);
  t.p_u.resize(n, kWeeks);
  t.kappa.resize(n, kWeeks);
  t.y_alpha.resize(n, kWeeks);
  t.weekly_gamma.resize(kWeeks);
  t.spatial_gamma.resize(n);
  for (int w = 1; w <= kWeeks; ++w)
    t.weekly_gamma(w - 1) = sim.gamma_weekly_amp * weekly_shape(w);
  for (int s = 0; s < n; ++s)
    t.spatial_gamma(s) = sim.gamma_spatial_amp *
                         spatial_shape(sites.sites[s].x_km,
                                       sites.sites[s].y_km, sim.region_km);
  for (int s = 0; s < n; ++s) {
    const double sp_gp =
        sim.gp_spatial_amp *
        spatial_shape(sites.sites[s].x_km, sites.sites[s].y_km, sim.region_km);
    for (int w = 1; w <= kWeeks; ++w) {
      const double mu =
          std::exp(sim.beta0_gamma + t.spatial_gamma(s) + t.weekly_gamma(w - 1));
      const double r_q = std::exp(sim.beta0_gp + sp_gp +
                                  sim.gp_weekly_amp * weekly_shape(w));
      t.mu(s, w - 1) = mu;
      t.u(s, w - 1) = gamma_quantile(config.p_plus, GammaMeanShape{mu, sim.k});
      t.p_u(s, w - 1) = sim.p_wet * (1.0 - config.p_plus);
      t.kappa(s, w - 1) = mu * r_q;
      t.y_alpha(s, w - 1) =
          compose_quantile(config.alpha, t.u(s, w - 1), t.p_u(s, w - 1),
                           t.kappa(s, w - 1), config.q, sim.xi);
    }
  }
  return t;
}

double simulate_cell_draw(const TruthRecord& truth, int site, int week,
                          std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (unif(rng) >= truth.p_wet) return 0.0;  // dry day
  const double u = truth.u(site, week - 1);
  if (unif(rng) < 1.0 - truth.p_plus) {
    // tail: threshold plus a GP excess, by inverse CDF
    const GPQuantileParam par{truth.kappa(site, week - 1), truth.q, truth.xi};
    double v = unif(rng);
    while (v <= 0.0) v = unif(rng);
    return u + gp_quantile(v, par);
  }
  // body: wet-day Gamma conditioned below the threshold, by rejection
  std::gamma_distribution<double> gam(truth.k,
                                      truth.mu(site, week - 1) / truth.k);
  for (int tries = 0; tries < 10000; ++tries) {
    const double y = gam(rng);
    if (y <= u && y > 0.0) return y;
  }
  throw ConvergenceError("simulate_cell_draw: body rejection stalled");
}

std::pair<Dataset, TruthRecord> simulate(const RunConfig& config) {
  const SimulateSettings& sim = config.sim;
  SiteSet sites = simulated_sites(sim, config.seed);
  TruthRecord truth = make_truth(sites, config);

  std::mt19937_64 rng(config.seed);
  const int lo = serial_from_date(Date{sim.start_year, 1, 1});
  const int hi =
      serial_from_date(Date{sim.start_year + sim.n_years - 1, 12, 31});
  std::vector<Observation> records;
  records.reserve(static_cast<size_t>(sites.size()) * (hi - lo + 1));
  for (int s = 0; s < sites.size(); ++s) {
    for (int d = lo; d <= hi; ++d) {
      Observation r;
      r.site = s;
      r.date = date_from_serial(d);
      r.day_serial = d;
      r.value = simulate_cell_draw(truth, s, week_of_day(r.date), rng);
      records.push_back(r);
    }
  }
  return {make_dataset(std::move(sites), std::move(records)),
          std::move(truth)};
}

void write_truth(const std::string& path, const TruthRecord& truth,
                 const std::string& config_hash) {
  using json = nlohmann::ordered_json;
  auto mat = [](const Mat& m) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      rows.emplace_back(m.row(i).begin(), m.row(i).end());
    return rows;
  };
  json j;
  j["tool"] = "tailreg";
  j["version"] = kVersion;
  j["config_hash"] = config_hash;
  j["k"] = truth.k;
  j["xi"] = truth.xi;
  j["q"] = truth.q;
  j["p_plus"] = truth.p_plus;
  j["p_wet"] = truth.p_wet;
  j["alpha"] = truth.alpha;
  json sites = json::array();
  for (const auto& s : truth.sites.sites)
    sites.push_back({{"id", s.id}, {"x_km", s.x_km}, {"y_km", s.y_km}});
  j["sites"] = sites;
  j["mu"] = mat(truth.mu);
  j["u"] = mat(truth.u);
  j["p_u"] = mat(truth.p_u);
  j["kappa"] = mat(truth.kappa);
  j["y_alpha"] = mat(truth.y_alpha);
  j["weekly_gamma"] =
      std::vector<double>(truth.weekly_gamma.begin(), truth.weekly_gamma.end());
  j["spatial_gamma"] = std::vector<double>(truth.spatial_gamma.begin(),
                                           truth.spatial_gamma.end());
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << j.dump(1) << "\n";
}

}  // namespace tailreg
