#include "tailreg/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tailreg {

namespace {

std::string trim(std::string s) {
  const auto notspace = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad numeric value for " + key + ": '" + v + "'");
  }
}

long parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer value for " + key + ": '" + v + "'");
  }
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

CleaningRule parse_drop_range(const std::string& key, const std::string& item) {
  // "YYYY-MM-DD..YYYY-MM-DD" optionally followed by "@id1,id2"
  CleaningRule rule;
  rule.type = CleaningRuleType::drop_range;
  std::string range = item;
  const auto at = item.find('@');
  if (at != std::string::npos) {
    range = trim(item.substr(0, at));
    rule.station_ids = split(item.substr(at + 1), ',');
  }
  const auto sep = range.find("..");
  if (sep == std::string::npos)
    throw ConfigError("config: bad range in " + key + ": '" + item + "'");
  if (!parse_iso_date(trim(range.substr(0, sep)), rule.from) ||
      !parse_iso_date(trim(range.substr(sep + 2)), rule.to))
    throw ConfigError("config: bad date in " + key + ": '" + item + "'");
  if (serial_from_date(rule.from) > serial_from_date(rule.to))
    throw ConfigError("config: empty range in " + key + ": '" + item + "'");
  return rule;
}

}  // namespace

std::string CleaningRule::describe() const {
  std::ostringstream os;
  switch (type) {
    case CleaningRuleType::drop_station: {
      os << "drop_station(";
      for (size_t i = 0; i < station_ids.size(); ++i)
        os << (i ? "," : "") << station_ids[i];
      os << ")";
      break;
    }
    case CleaningRuleType::drop_constant_runs:
      os << "drop_constant_runs(min_run=" << min_run << ")";
      break;
    case CleaningRuleType::drop_range: {
      os << "drop_range(" << format_iso_date(from) << ".."
         << format_iso_date(to);
      if (!station_ids.empty()) {
        os << "@";
        for (size_t i = 0; i < station_ids.size(); ++i)
          os << (i ? "," : "") << station_ids[i];
      }
      os << ")";
      break;
    }
  }
  return os.str();
}

void RunConfig::apply_override(const std::string& dotted_key,
                               const std::string& raw) {
  const std::string value = trim(raw);
  const std::string& k = dotted_key;
  if (k == "data.data_path") data_path = value;
  else if (k == "data.site_path") site_path = value;
  else if (k == "model.p_plus") p_plus = parse_double(k, value);
  else if (k == "model.psi_km") psi_km = parse_double(k, value);
  else if (k == "model.sigma_t") sigma_t = parse_double(k, value);
  else if (k == "model.alpha") alpha = parse_double(k, value);
  else if (k == "model.q") q = parse_double(k, value);
  else if (k == "model.intercept_variance")
    intercept_variance = parse_double(k, value);
  else if (k == "priors.xi_prior_form") {
    if (value == "exp" || value == "exponential")
      priors.xi_prior_form = PCPriorForm::exponential;
    else if (value == "exact")
      priors.xi_prior_form = PCPriorForm::exact;
    else
      throw ConfigError("config: xi_prior_form must be 'exp' or 'exact'");
  } else if (k == "priors.xi_prior_rate")
    priors.xi_prior_rate = parse_double(k, value);
  else if (k == "priors.shape_prior_shape")
    priors.shape_prior_shape = parse_double(k, value);
  else if (k == "priors.shape_prior_mean")
    priors.shape_prior_mean = parse_double(k, value);
  else if (k == "priors.precision_prior_shape")
    priors.precision_prior_shape = parse_double(k, value);
  else if (k == "priors.precision_prior_inverse_scale")
    priors.precision_prior_inverse_scale = parse_double(k, value);
  else if (k == "engine.newton_tol") engine.newton_tol = parse_double(k, value);
  else if (k == "engine.newton_max_iter")
    engine.newton_max_iter = static_cast<int>(parse_int(k, value));
  else if (k == "engine.grid_step") engine.grid_step = parse_double(k, value);
  else if (k == "engine.grid_edge_drop")
    engine.edge_drop = parse_double(k, value);
  else if (k == "engine.grid_max_points")
    engine.max_grid_points = static_cast<int>(parse_int(k, value));
  else if (k == "engine.threads")
    engine.threads = static_cast<int>(parse_int(k, value));
  else if (k == "pipeline.min_exceedances")
    min_exceedances = static_cast<int>(parse_int(k, value));
  else if (k == "pipeline.warn_exceedances")
    warn_exceedances = static_cast<int>(parse_int(k, value));
  else if (k == "cv.axis") {
    if (value != "station" && value != "year")
      throw ConfigError("config: cv.axis must be 'station' or 'year'");
    cv_axis = value;
  } else if (k == "cv.alpha")
    cv_alpha = parse_double(k, value);
  else if (k == "cv.year_start")
    cv_year_start = static_cast<int>(parse_int(k, value));
  else if (k == "cv.year_end")
    cv_year_end = static_cast<int>(parse_int(k, value));
  else if (k == "cv.eval_stations")
    cv_eval_stations = split(value, ',');
  else if (k == "cleaning.drop_stations") {
    CleaningRule rule;
    rule.type = CleaningRuleType::drop_station;
    rule.station_ids = split(value, ',');
    cleaning.push_back(std::move(rule));
  } else if (k == "cleaning.drop_constant_runs") {
    CleaningRule rule;
    rule.type = CleaningRuleType::drop_constant_runs;
    rule.min_run = static_cast<int>(parse_int(k, value));
    if (rule.min_run < 2)
      throw ConfigError("config: drop_constant_runs needs min_run >= 2");
    cleaning.push_back(std::move(rule));
  } else if (k == "cleaning.drop_range") {
    for (const auto& item : split(value, ';'))
      cleaning.push_back(parse_drop_range(k, item));
  } else if (k == "simulate.n_stations")
    sim.n_stations = static_cast<int>(parse_int(k, value));
  else if (k == "simulate.start_year")
    sim.start_year = static_cast<int>(parse_int(k, value));
  else if (k == "simulate.n_years")
    sim.n_years = static_cast<int>(parse_int(k, value));
  else if (k == "simulate.region_km") sim.region_km = parse_double(k, value);
  else if (k == "simulate.k") sim.k = parse_double(k, value);
  else if (k == "simulate.xi") sim.xi = parse_double(k, value);
  else if (k == "simulate.p_wet") sim.p_wet = parse_double(k, value);
  else if (k == "simulate.beta0_gamma")
    sim.beta0_gamma = parse_double(k, value);
  else if (k == "simulate.gamma_spatial_amp")
    sim.gamma_spatial_amp = parse_double(k, value);
  else if (k == "simulate.gamma_weekly_amp")
    sim.gamma_weekly_amp = parse_double(k, value);
  else if (k == "simulate.beta0_gp") sim.beta0_gp = parse_double(k, value);
  else if (k == "simulate.gp_spatial_amp")
    sim.gp_spatial_amp = parse_double(k, value);
  else if (k == "simulate.gp_weekly_amp")
    sim.gp_weekly_amp = parse_double(k, value);
  else if (k == "run.seed")
    seed = static_cast<std::uint64_t>(parse_int(k, value));
  else if (k == "run.output_dir") output_dir = value;
  else
    throw ConfigError("config: unknown key '" + k + "'");
}

void RunConfig::validate() const {
  auto prob = [](double v, const char* name) {
    if (!(v > 0.0 && v < 1.0))
      throw ConfigError(std::string("config: ") + name +
                        " must be in (0,1)");
  };
  prob(p_plus, "model.p_plus");
  prob(alpha, "model.alpha");
  prob(q, "model.q");
  prob(cv_alpha, "cv.alpha");
  if (!(sigma_t > 0.0)) throw ConfigError("config: model.sigma_t must be > 0");
  if (!(psi_km > 0.0)) throw ConfigError("config: model.psi_km must be > 0");
  if (!(intercept_variance > 0.0))
    throw ConfigError("config: model.intercept_variance must be > 0");
  if (!(priors.xi_prior_rate > 0.0))
    throw ConfigError("config: priors.xi_prior_rate must be > 0");
  if (!(priors.shape_prior_shape > 0.0 && priors.shape_prior_mean > 0.0))
    throw ConfigError("config: shape prior parameters must be > 0");
  if (!(priors.precision_prior_shape > 0.0 &&
        priors.precision_prior_inverse_scale > 0.0))
    throw ConfigError("config: precision prior parameters must be > 0");
  if (min_exceedances < 1)
    throw ConfigError("config: pipeline.min_exceedances must be >= 1");
  if (!(sim.p_wet > 0.0 && sim.p_wet < 1.0))
    throw ConfigError("config: simulate.p_wet must be in (0,1)");
  if (sim.n_stations < 1 || sim.n_years < 1)
    throw ConfigError("config: simulate sizes must be >= 1");
}

std::string RunConfig::canonical_text() const {
  std::ostringstream os;
  os << "cleaning.rules=";
  for (size_t i = 0; i < cleaning.size(); ++i)
    os << (i ? ";" : "") << cleaning[i].describe();
  os << "\n";
  os << "cv.alpha=" << fmt(cv_alpha) << "\n";
  os << "cv.axis=" << cv_axis << "\n";
  os << "cv.eval_stations=";
  for (size_t i = 0; i < cv_eval_stations.size(); ++i)
    os << (i ? "," : "") << cv_eval_stations[i];
  os << "\n";
  os << "cv.year_end=" << cv_year_end << "\n";
  os << "cv.year_start=" << cv_year_start << "\n";
  os << "data.data_path=" << data_path << "\n";
  os << "data.site_path=" << site_path << "\n";
  os << "engine.grid_edge_drop=" << fmt(engine.edge_drop) << "\n";
  os << "engine.grid_max_points=" << engine.max_grid_points << "\n";
  os << "engine.grid_step=" << fmt(engine.grid_step) << "\n";
  os << "engine.newton_max_iter=" << engine.newton_max_iter << "\n";
  os << "engine.newton_tol=" << fmt(engine.newton_tol) << "\n";
  os << "model.alpha=" << fmt(alpha) << "\n";
  os << "model.intercept_variance=" << fmt(intercept_variance) << "\n";
  os << "model.p_plus=" << fmt(p_plus) << "\n";
  os << "model.psi_km=" << fmt(psi_km) << "\n";
  os << "model.q=" << fmt(q) << "\n";
  os << "model.sigma_t=" << fmt(sigma_t) << "\n";
  os << "pipeline.min_exceedances=" << min_exceedances << "\n";
  os << "pipeline.warn_exceedances=" << warn_exceedances << "\n";
  os << "priors.precision_prior_inverse_scale="
     << fmt(priors.precision_prior_inverse_scale) << "\n";
  os << "priors.precision_prior_shape=" << fmt(priors.precision_prior_shape)
     << "\n";
  os << "priors.shape_prior_mean=" << fmt(priors.shape_prior_mean) << "\n";
  os << "priors.shape_prior_shape=" << fmt(priors.shape_prior_shape) << "\n";
  os << "priors.xi_prior_form="
     << (priors.xi_prior_form == PCPriorForm::exact ? "exact" : "exp") << "\n";
  os << "priors.xi_prior_rate=" << fmt(priors.xi_prior_rate) << "\n";
  os << "run.seed=" << seed << "\n";
  os << "simulate.beta0_gamma=" << fmt(sim.beta0_gamma) << "\n";
  os << "simulate.beta0_gp=" << fmt(sim.beta0_gp) << "\n";
  os << "simulate.gamma_spatial_amp=" << fmt(sim.gamma_spatial_amp) << "\n";
  os << "simulate.gamma_weekly_amp=" << fmt(sim.gamma_weekly_amp) << "\n";
  os << "simulate.gp_spatial_amp=" << fmt(sim.gp_spatial_amp) << "\n";
  os << "simulate.gp_weekly_amp=" << fmt(sim.gp_weekly_amp) << "\n";
  os << "simulate.k=" << fmt(sim.k) << "\n";
  os << "simulate.n_stations=" << sim.n_stations << "\n";
  os << "simulate.n_years=" << sim.n_years << "\n";
  os << "simulate.p_wet=" << fmt(sim.p_wet) << "\n";
  os << "simulate.region_km=" << fmt(sim.region_km) << "\n";
  os << "simulate.start_year=" << sim.start_year << "\n";
  os << "simulate.xi=" << fmt(sim.xi) << "\n";
  return os.str();
}

std::string RunConfig::hash() const {
  // FNV-1a 64
  const std::string text = canonical_text();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config: bad section header at line " +
                          std::to_string(line_no));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key=value at line " +
                        std::to_string(line_no));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty())
      throw ConfigError("config: key '" + key + "' outside any section");
    cfg.apply_override(section + "." + key, value);
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

}  // namespace tailreg
