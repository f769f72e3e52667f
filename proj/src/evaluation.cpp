#include "tailreg/evaluation.hpp"

#include "tailreg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace tailreg {

double quantile_loss(double y, double qhat, double alpha) {
  return y > qhat ? alpha * (y - qhat) : -(1.0 - alpha) * (y - qhat);
}

CVPlan make_cv_plan(const Dataset& data, const RunConfig& config,
                    HoldoutAxis axis) {
  CVPlan plan;
  plan.axis = axis;
  plan.alpha = config.cv_alpha;

  std::set<int> observed;
  for (const auto& r : data.records) observed.insert(r.site);

  if (config.cv_eval_stations.empty()) {
    plan.eval_sites.assign(observed.begin(), observed.end());
  } else {
    for (const auto& id : config.cv_eval_stations) {
      const int idx = data.sites.index_of(id);
      if (idx < 0)
        throw ConfigError("cv: evaluation station '" + id +
                          "' not in the site set");
      plan.eval_sites.push_back(idx);
    }
    std::sort(plan.eval_sites.begin(), plan.eval_sites.end());
  }

  if (axis == HoldoutAxis::year) {
    for (int y : data.years()) {
      if (config.cv_year_start != 0 && y < config.cv_year_start) continue;
      if (config.cv_year_end != 0 && y > config.cv_year_end) continue;
      plan.years.push_back(y);
    }
    if (plan.years.empty()) throw ConfigError("cv: no year folds in range");
  }
  return plan;
}

namespace {

Dataset drop_site(const Dataset& data, int site) {
  Dataset out;
  out.sites = data.sites;  // prediction still possible at the held-out site
  for (const auto& r : data.records)
    if (r.site != site) out.records.push_back(r);
  return out;
}

Dataset drop_year(const Dataset& data, int year) {
  Dataset out;
  out.sites = data.sites;
  for (const auto& r : data.records)
    if (r.date.year != year) out.records.push_back(r);
  return out;
}

// Fits the pipeline on `reduced` and sums the quantile loss over the listed
// held-out observations.
FoldOutcome run_fold(const Dataset& reduced,
                     const std::vector<const Observation*>& held_out,
                     const RunConfig& config, double alpha,
                     const std::string& label) {
  FoldOutcome out;
  out.fold = label;
  out.n_obs = static_cast<long>(held_out.size());
  try {
    RunConfig fold_config = config;
    fold_config.engine.threads = 1;  // parallelism lives at the fold level
    const StageFits fits = run_stages(reduced, fold_config);
    std::vector<std::pair<int, Date>> targets;
    targets.reserve(held_out.size());
    for (const Observation* r : held_out) targets.emplace_back(r->site, r->date);
    const QuantilePrediction pred = predict_quantile(
        alpha, fits.stage2, fits.stage3, fits.thresholds, targets);
    double loss = 0.0;
    for (size_t i = 0; i < held_out.size(); ++i) {
      const double qhat = pred.daily[i].value;
      if (pred.daily[i].below_threshold_flag || !std::isfinite(qhat))
        throw DataError("fold " + label + ": flagged prediction cell");
      loss += quantile_loss(held_out[i]->value, qhat, alpha);
    }
    out.loss = loss;
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  return out;
}

struct FoldSpec {
  std::string label;
  Dataset reduced;
  std::vector<const Observation*> held_out;
};

// held_out pointers refer to `data`, which must outlive the specs.
std::vector<FoldSpec> space_folds(const Dataset& data, const CVPlan& plan) {
  std::vector<FoldSpec> folds;
  for (int site : plan.eval_sites) {
    FoldSpec f;
    f.label = "station:" + data.sites.sites[site].id;
    f.reduced = drop_site(data, site);
    for (const auto& r : data.records)
      if (r.site == site) f.held_out.push_back(&r);
    if (f.held_out.empty()) continue;  // nothing to score at this station
    folds.push_back(std::move(f));
  }
  return folds;
}

std::vector<FoldSpec> time_folds(const Dataset& data, const CVPlan& plan) {
  std::set<int> eval(plan.eval_sites.begin(), plan.eval_sites.end());
  std::vector<FoldSpec> folds;
  for (int year : plan.years) {
    FoldSpec f;
    f.label = "year:" + std::to_string(year);
    f.reduced = drop_year(data, year);
    for (const auto& r : data.records)
      if (r.date.year == year && eval.count(r.site)) f.held_out.push_back(&r);
    if (f.held_out.empty()) continue;
    folds.push_back(std::move(f));
  }
  return folds;
}

CVScore score_folds(std::vector<FoldSpec> folds, const RunConfig& config,
                    double alpha, int threads) {
  CVScore score;
  score.folds.resize(folds.size());
  parallel_for(
      static_cast<int>(folds.size()),
      [&](int i) {
        score.folds[i] = run_fold(folds[i].reduced, folds[i].held_out, config,
                                  alpha, folds[i].label);
      },
      threads);
  int ok = 0;
  for (const auto& f : score.folds) {
    if (f.ok) {
      score.total += f.loss;
      ++ok;
    }
  }
  score.completeness =
      folds.empty() ? 1.0 : static_cast<double>(ok) / folds.size();
  return score;
}

}  // namespace

CVScore cv_space(const Dataset& data, const RunConfig& config,
                 const CVPlan& plan) {
  if (plan.axis != HoldoutAxis::station)
    throw std::invalid_argument("cv_space: plan axis must be station");
  return score_folds(space_folds(data, plan), config, plan.alpha,
                     config.engine.threads);
}

CVScore cv_time(const Dataset& data, const RunConfig& config,
                const CVPlan& plan) {
  if (plan.axis != HoldoutAxis::year)
    throw std::invalid_argument("cv_time: plan axis must be year");
  return score_folds(time_folds(data, plan), config, plan.alpha,
                     config.engine.threads);
}

std::vector<SweepPoint> sweep_preset(const std::string& name,
                                     const RunConfig& config) {
  std::vector<double> psis, sigmas, ps;
  if (name == "paper") {
    for (int i = 1; i <= 10; ++i) psis.push_back(25.0 * i);
    for (int i = 1; i <= 5; ++i) sigmas.push_back(0.005 * i);
    for (int i = 0; i <= 9; ++i) ps.push_back(0.90 + 0.01 * i);
  } else if (name == "mini") {
    psis = {50.0, 150.0};
    sigmas = {0.010, 0.020};
    ps = {0.90, 0.94, 0.98};
  } else if (name == "single") {
    psis = {config.psi_km};
    sigmas = {config.sigma_t};
    ps = {config.p_plus};
  } else {
    throw ConfigError("unknown sweep preset '" + name + "'");
  }
  std::vector<SweepPoint> sweep;
  int id = 1;
  for (double sigma : sigmas)
    for (double p : ps)
      for (double psi : psis) sweep.push_back({id++, psi, sigma, p});
  return sweep;
}

std::vector<CVResult> rank_models(const std::vector<SweepPoint>& sweep,
                                  const Dataset& data, const RunConfig& config,
                                  int threads) {
  const CVPlan plan_s = make_cv_plan(data, config, HoldoutAxis::station);
  const CVPlan plan_t = make_cv_plan(data, config, HoldoutAxis::year);
  const std::vector<FoldSpec> sf = space_folds(data, plan_s);
  const std::vector<FoldSpec> tf = time_folds(data, plan_t);

  struct Task {
    int config_idx;
    bool space;
    int fold_idx;
  };
  std::vector<Task> tasks;
  for (int c = 0; c < static_cast<int>(sweep.size()); ++c) {
    for (int f = 0; f < static_cast<int>(sf.size()); ++f)
      tasks.push_back({c, true, f});
    for (int f = 0; f < static_cast<int>(tf.size()); ++f)
      tasks.push_back({c, false, f});
  }

  std::vector<FoldOutcome> outcomes(tasks.size());
  parallel_for(
      static_cast<int>(tasks.size()),
      [&](int i) {
        const Task& t = tasks[i];
        RunConfig c = config;
        c.psi_km = sweep[t.config_idx].psi_km;
        c.sigma_t = sweep[t.config_idx].sigma_t;
        c.p_plus = sweep[t.config_idx].p_plus;
        const FoldSpec& fold = t.space ? sf[t.fold_idx] : tf[t.fold_idx];
        outcomes[i] = run_fold(fold.reduced, fold.held_out, c,
                               t.space ? plan_s.alpha : plan_t.alpha,
                               fold.label);
      },
      threads);

  std::vector<CVResult> results(sweep.size());
  for (size_t c = 0; c < sweep.size(); ++c) results[c].config = sweep[c];
  for (size_t i = 0; i < tasks.size(); ++i) {
    CVResult& r = results[tasks[i].config_idx];
    (tasks[i].space ? r.folds_space : r.folds_time).push_back(outcomes[i]);
  }
  for (auto& r : results) {
    int ok_s = 0, ok_t = 0;
    for (const auto& f : r.folds_space)
      if (f.ok) {
        r.space += f.loss;
        ++ok_s;
      }
    for (const auto& f : r.folds_time)
      if (f.ok) {
        r.time += f.loss;
        ++ok_t;
      }
    r.spacetime = r.space + r.time;
    r.completeness_space =
        r.folds_space.empty() ? 1.0
                              : static_cast<double>(ok_s) / r.folds_space.size();
    r.completeness_time =
        r.folds_time.empty() ? 1.0
                             : static_cast<double>(ok_t) / r.folds_time.size();
  }
  std::stable_sort(results.begin(), results.end(),
                   [](const CVResult& a, const CVResult& b) {
                     if (a.spacetime != b.spacetime)
                       return a.spacetime < b.spacetime;
                     return a.config.id < b.config.id;
                   });
  return results;
}

}  // namespace tailreg
