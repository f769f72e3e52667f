#include "tailreg/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

namespace tailreg {

namespace {

using json = nlohmann::ordered_json;

std::string trim(std::string s) {
  const auto notspace = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(trim(cur));
  return out;
}

bool parse_number(const std::string& s, double& out) {
  try {
    size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  return out;
}

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

}  // namespace

SiteSet read_sites(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open site file '" + path + "'");
  std::string line;
  long line_no = 0;
  bool header_seen = false;
  std::vector<Site> sites;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_csv(line);
    if (!header_seen) {
      if (fields != std::vector<std::string>{"station_id", "x_km", "y_km"})
        throw DataError("site file line " + std::to_string(line_no) +
                        ": expected header 'station_id,x_km,y_km'");
      header_seen = true;
      continue;
    }
    if (fields.size() != 3)
      throw DataError("site file line " + std::to_string(line_no) +
                      ": expected 3 fields");
    Site s;
    s.id = fields[0];
    if (s.id.empty() || !parse_number(fields[1], s.x_km) ||
        !parse_number(fields[2], s.y_km))
      throw DataError("site file line " + std::to_string(line_no) +
                      ": malformed row");
    sites.push_back(std::move(s));
  }
  if (!header_seen) throw DataError("site file '" + path + "': missing header");
  return SiteSet(std::move(sites));
}

Dataset ingest(const std::string& data_path, const std::string& site_path,
               ParseReport* report) {
  SiteSet sites = read_sites(site_path);
  std::ifstream in(data_path);
  if (!in) throw DataError("cannot open data file '" + data_path + "'");

  ParseReport local;
  std::string line;
  long line_no = 0;
  bool header_seen = false;
  std::vector<Observation> records;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_csv(line);
    if (!header_seen) {
      if (fields !=
          std::vector<std::string>{"station_id", "date", "value_inches"})
        throw DataError("data file line " + std::to_string(line_no) +
                        ": expected header 'station_id,date,value_inches'");
      header_seen = true;
      continue;
    }
    ++local.total_rows;
    if (fields.size() != 3)
      throw DataError("data file line " + std::to_string(line_no) +
                      ": expected 3 fields");
    Observation r;
    const int site = sites.index_of(fields[0]);
    if (site < 0)
      throw DataError("data file line " + std::to_string(line_no) +
                      ": unknown station '" + fields[0] + "'");
    r.site = site;
    if (!parse_iso_date(fields[1], r.date))
      throw DataError("data file line " + std::to_string(line_no) +
                      ": malformed date '" + fields[1] + "'");
    if (!parse_number(fields[2], r.value))
      throw DataError("data file line " + std::to_string(line_no) +
                      ": malformed value '" + fields[2] + "'");
    if (!std::isfinite(r.value)) {
      local.rejected.emplace_back(line_no, "nonfinite_value");
      continue;
    }
    if (r.value < 0.0) {
      local.rejected.emplace_back(line_no, "negative_value");
      continue;
    }
    r.day_serial = serial_from_date(r.date);
    records.push_back(r);
    ++local.accepted;
  }
  if (!header_seen)
    throw DataError("data file '" + data_path + "': missing header");
  if (report) *report = local;
  return make_dataset(std::move(sites), std::move(records));
}

Dataset clean(const Dataset& data, const std::vector<CleaningRule>& rules,
              CleaningReport* report) {
  CleaningReport local;
  Dataset cur = data;
  for (const auto& rule : rules) {
    std::vector<Observation> kept;
    kept.reserve(cur.records.size());
    long removed = 0;
    switch (rule.type) {
      case CleaningRuleType::drop_station: {
        std::set<int> drop;
        for (const auto& id : rule.station_ids) {
          const int idx = cur.sites.index_of(id);
          if (idx >= 0) drop.insert(idx);
        }
        for (const auto& r : cur.records) {
          if (drop.count(r.site)) {
            ++removed;
          } else {
            kept.push_back(r);
          }
        }
        break;
      }
      case CleaningRuleType::drop_constant_runs: {
        // runs of identical values on consecutive days within a station
        const auto& rec = cur.records;  // sorted by (site, day)
        std::vector<bool> drop(rec.size(), false);
        size_t i = 0;
        while (i < rec.size()) {
          size_t j = i + 1;
          while (j < rec.size() && rec[j].site == rec[i].site &&
                 rec[j].day_serial == rec[j - 1].day_serial + 1 &&
                 rec[j].value == rec[i].value)
            ++j;
          if (static_cast<int>(j - i) >= rule.min_run)
            for (size_t k = i; k < j; ++k) drop[k] = true;
          i = j;
        }
        for (size_t k = 0; k < rec.size(); ++k) {
          if (drop[k]) {
            ++removed;
          } else {
            kept.push_back(rec[k]);
          }
        }
        break;
      }
      case CleaningRuleType::drop_range: {
        std::set<int> only;
        for (const auto& id : rule.station_ids) {
          const int idx = cur.sites.index_of(id);
          if (idx >= 0) only.insert(idx);
        }
        const int lo = serial_from_date(rule.from);
        const int hi = serial_from_date(rule.to);
        for (const auto& r : cur.records) {
          const bool station_match = only.empty() || only.count(r.site);
          if (station_match && r.day_serial >= lo && r.day_serial <= hi) {
            ++removed;
          } else {
            kept.push_back(r);
          }
        }
        break;
      }
    }
    cur.records = std::move(kept);
    local.removed.emplace_back(rule.describe(), removed);
    local.total_removed += removed;
  }
  if (report) *report = local;
  return cur;
}

namespace {

json summary_to_json(const PosteriorSummary& s) {
  json j;
  j["names"] = s.names;
  j["mean"] = std::vector<double>(s.mean.begin(), s.mean.end());
  j["sd"] = std::vector<double>(s.sd.begin(), s.sd.end());
  j["lower"] = std::vector<double>(s.lower.begin(), s.lower.end());
  j["upper"] = std::vector<double>(s.upper.begin(), s.upper.end());
  return j;
}

PosteriorSummary summary_from_json(const json& j) {
  PosteriorSummary s;
  s.names = j.at("names").get<std::vector<std::string>>();
  auto vec = [&](const char* key) {
    const auto v = j.at(key).get<std::vector<double>>();
    return Eigen::Map<const Vec>(v.data(), v.size()).eval();
  };
  s.mean = vec("mean");
  s.sd = vec("sd");
  s.lower = vec("lower");
  s.upper = vec("upper");
  return s;
}

json matrix_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat matrix_from_json(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) return Mat(0, 0);
  Mat m(rows.size(), rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t k = 0; k < rows[i].size(); ++k) m(i, k) = rows[i][k];
  return m;
}

json stage_to_json(const StageFit& s) {
  json j;
  j["stage"] = s.stage;
  j["n_sites"] = s.n_sites;
  j["n_weeks"] = s.n_weeks;
  j["n_obs"] = s.n_obs;
  j["gp_q"] = s.gp_q;
  j["latent"] = summary_to_json(s.latent);
  j["hyper"] = summary_to_json(s.hyper);
  if (s.offset.size() > 0) j["offset"] = matrix_to_json(s.offset);
  j["warnings"] = s.warnings;
  json diag;
  diag["grid_size"] = s.diag.grid_size;
  diag["edge_mass"] = s.diag.edge_mass;
  diag["newton_iter_max"] = s.diag.newton_iter_max;
  diag["clamp_count"] = s.diag.clamp_count;
  diag["curvature_clamps"] = s.diag.curvature_clamps;
  diag["theta_mode"] =
      std::vector<double>(s.diag.theta_mode.begin(), s.diag.theta_mode.end());
  j["diagnostics"] = diag;
  return j;
}

StageFit stage_from_json(const json& j) {
  StageFit s;
  s.stage = j.at("stage").get<std::string>();
  s.n_sites = j.at("n_sites").get<int>();
  s.n_weeks = j.at("n_weeks").get<int>();
  s.n_obs = j.at("n_obs").get<long>();
  s.gp_q = j.at("gp_q").get<double>();
  s.latent = summary_from_json(j.at("latent"));
  s.hyper = summary_from_json(j.at("hyper"));
  if (j.contains("offset")) s.offset = matrix_from_json(j.at("offset"));
  s.warnings = j.at("warnings").get<std::vector<std::string>>();
  const auto& diag = j.at("diagnostics");
  s.diag.grid_size = diag.at("grid_size").get<int>();
  s.diag.edge_mass = diag.at("edge_mass").get<double>();
  s.diag.newton_iter_max = diag.at("newton_iter_max").get<int>();
  s.diag.clamp_count = diag.at("clamp_count").get<std::uint64_t>();
  s.diag.curvature_clamps = diag.at("curvature_clamps").get<int>();
  const auto mode = diag.at("theta_mode").get<std::vector<double>>();
  s.diag.theta_mode = Eigen::Map<const Vec>(mode.data(), mode.size());
  return s;
}

}  // namespace

void write_fit_artifact(const std::string& path, const PipelineResult& result,
                        const Dataset& data, const RunConfig& config) {
  json j;
  j["tool"] = "tailreg";
  j["version"] = kVersion;
  j["config_hash"] = config.hash();
  j["alpha"] = config.alpha;
  json sites = json::array();
  for (const auto& s : data.sites.sites) {
    sites.push_back({{"id", s.id}, {"x_km", s.x_km}, {"y_km", s.y_km}});
  }
  j["sites"] = sites;
  j["thresholds"] = {{"p_plus", result.thresholds.p_plus},
                     {"provenance", result.thresholds.provenance},
                     {"u", matrix_to_json(result.thresholds.u)}};
  j["stages"] = {{"gamma", stage_to_json(result.stage1)},
                 {"bernoulli", stage_to_json(result.stage2)},
                 {"gp", stage_to_json(result.stage3)}};
  auto out = open_out(path);
  out << j.dump(1) << "\n";
}

PipelineArtifact read_fit_artifact(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open fit artifact '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("fit artifact '" + path + "': " + e.what());
  }
  PipelineArtifact art;
  try {
    art.config_hash = j.at("config_hash").get<std::string>();
    art.version = j.at("version").get<std::string>();
    art.alpha = j.at("alpha").get<double>();
    std::vector<Site> sites;
    for (const auto& s : j.at("sites"))
      sites.push_back({s.at("id").get<std::string>(),
                       s.at("x_km").get<double>(), s.at("y_km").get<double>()});
    art.sites = SiteSet(std::move(sites));
    art.thresholds.p_plus = j.at("thresholds").at("p_plus").get<double>();
    art.thresholds.provenance =
        j.at("thresholds").at("provenance").get<std::string>();
    art.thresholds.u = matrix_from_json(j.at("thresholds").at("u"));
    art.stage1 = stage_from_json(j.at("stages").at("gamma"));
    art.stage2 = stage_from_json(j.at("stages").at("bernoulli"));
    art.stage3 = stage_from_json(j.at("stages").at("gp"));
  } catch (const json::exception& e) {
    throw DataError("fit artifact '" + path + "': " + e.what());
  }
  return art;
}

void write_predictions_csv(const std::string& path,
                           const QuantilePrediction& pred,
                           const SiteSet& sites,
                           const std::string& config_hash) {
  auto out = open_out(path);
  out << "# generator=tailreg " << kVersion << " config=" << config_hash
      << "\n";
  out << "station_id,year,month,alpha,quantile_inches\n";
  std::vector<const MonthlyPrediction*> rows;
  rows.reserve(pred.monthly.size());
  for (const auto& m : pred.monthly) rows.push_back(&m);
  std::sort(rows.begin(), rows.end(),
            [&](const MonthlyPrediction* a, const MonthlyPrediction* b) {
              return std::tie(sites.sites[a->site].id, a->year, a->month) <
                     std::tie(sites.sites[b->site].id, b->year, b->month);
            });
  for (const MonthlyPrediction* m : rows) {
    out << sites.sites[m->site].id << "," << m->year << "," << m->month << ","
        << num(pred.alpha) << "," << num(m->value) << "\n";
  }
}

void write_cv_table(const std::string& path,
                    const std::vector<CVResult>& results,
                    const std::string& config_hash) {
  auto out = open_out(path);
  out << "# generator=tailreg " << kVersion << " config=" << config_hash
      << "\n";
  out << "model_id,psi_km,sigma_t,p_plus,cv_space,cv_time,cv_spacetime\n";
  for (const auto& r : results) {
    out << r.config.id << "," << num(r.config.psi_km) << ","
        << num(r.config.sigma_t) << "," << num(r.config.p_plus) << ","
        << num(r.space) << "," << num(r.time) << "," << num(r.spacetime)
        << "\n";
  }
}

void write_cv_folds(const std::string& path,
                    const std::vector<CVResult>& results,
                    const std::string& config_hash) {
  auto out = open_out(path);
  out << "# generator=tailreg " << kVersion << " config=" << config_hash
      << "\n";
  out << "model_id,axis,fold,ok,loss,n_obs,error\n";
  for (const auto& r : results) {
    auto emit = [&](const char* axis, const FoldOutcome& f) {
      std::string err = f.error;
      std::replace(err.begin(), err.end(), ',', ';');
      std::replace(err.begin(), err.end(), '\n', ' ');
      out << r.config.id << "," << axis << "," << f.fold << ","
          << (f.ok ? 1 : 0) << "," << num(f.loss) << "," << f.n_obs << ","
          << err << "\n";
    };
    for (const auto& f : r.folds_space) emit("space", f);
    for (const auto& f : r.folds_time) emit("time", f);
  }
}

void write_prior_table(const std::string& path, PCPriorForm form, double rate,
                       int n_points, double xi_max) {
  if (n_points < 2) throw ConfigError("prior table needs >= 2 points");
  auto out = open_out(path);
  out << "xi,density\n";
  for (int i = 0; i < n_points; ++i) {
    const double xi = xi_max * i / (n_points - 1);
    const double pdf = form == PCPriorForm::exact
                           ? pdf_exact(xi, PCPriorExact{rate / std::sqrt(2.0)})
                           : pdf_exp(xi, PCPriorExp{rate});
    out << num(xi) << "," << num(pdf) << "\n";
  }
}

void write_report_tables(const std::string& out_dir,
                         const PipelineArtifact& artifact) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::array<const StageFit*, 3> stages = {
      &artifact.stage1, &artifact.stage2, &artifact.stage3};

  {
    auto out = open_out((fs::path(out_dir) / "spatial_effects.csv").string());
    out << "stage,station_id,mean,sd,lower,upper\n";
    for (const StageFit* s : stages) {
      for (int i = 0; i < s->n_sites; ++i) {
        out << s->stage << "," << artifact.sites.sites[i].id << ","
            << num(s->latent.mean(1 + i)) << "," << num(s->latent.sd(1 + i))
            << "," << num(s->latent.lower(1 + i)) << ","
            << num(s->latent.upper(1 + i)) << "\n";
      }
    }
  }
  {
    auto out = open_out((fs::path(out_dir) / "weekly_effects.csv").string());
    out << "stage,week,mean,sd,lower,upper\n";
    for (const StageFit* s : stages) {
      for (int w = 0; w < s->n_weeks; ++w) {
        const int i = 1 + s->n_sites + w;
        out << s->stage << "," << (w + 1) << "," << num(s->latent.mean(i))
            << "," << num(s->latent.sd(i)) << "," << num(s->latent.lower(i))
            << "," << num(s->latent.upper(i)) << "\n";
      }
    }
  }
  {
    auto out = open_out((fs::path(out_dir) / "hyperparameters.csv").string());
    out << "stage,name,mean,sd,lower,upper\n";
    for (const StageFit* s : stages) {
      for (int i = 0; i < s->hyper.size(); ++i) {
        out << s->stage << "," << s->hyper.names[i] << ","
            << num(s->hyper.mean(i)) << "," << num(s->hyper.sd(i)) << ","
            << num(s->hyper.lower(i)) << "," << num(s->hyper.upper(i)) << "\n";
      }
    }
  }
  {
    auto out = open_out((fs::path(out_dir) / "thresholds.csv").string());
    out << "station_id,week,u_inches\n";
    for (Eigen::Index s = 0; s < artifact.thresholds.u.rows(); ++s)
      for (Eigen::Index w = 0; w < artifact.thresholds.u.cols(); ++w)
        out << artifact.sites.sites[s].id << "," << (w + 1) << ","
            << num(artifact.thresholds.u(s, w)) << "\n";
  }
}

}  // namespace tailreg
